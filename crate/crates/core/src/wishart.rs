//! Wishart process with `ω = βσ²`: parameters, conditional moments, the
//! moment generating function, its directional derivative and trace means.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    complexify, general_eigenvalues, kron, mat_exp, matrix_sqrt,
    solve, spectral_decomp, trace_of_product, vec, SpdMatrix, SymMatrix,
};

/// `dv = (ω + m v + v mᵀ)dt + √v dW σ + σ dWᵀ √v` with `ω = βσ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartParams {
    beta: f64,
    sigma: SpdMatrix,
    sigma_sq: SymMatrix,
    m: DMatrix<f64>,
    v0: SpdMatrix,
    omega: SymMatrix,
}

impl WishartParams {
    pub fn new(beta: f64, sigma: SpdMatrix, m: DMatrix<f64>, v0: SpdMatrix) -> Result<Self> {
        let n = sigma.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows().max(m.ncols()),
            });
        }
        if v0.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v0.dim(),
            });
        }
        if !beta.is_finite() || beta < n as f64 + 1.0 {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "degrees of freedom must satisfy beta >= n + 1",
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "entries must be finite",
            });
        }
        if general_eigenvalues(&m)?.iter().any(|l| !(l.re < 0.0)) {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "every eigenvalue must have a strictly negative real part",
            });
        }
        let sigma_sq = SymMatrix::symmetrize(&(sigma.as_matrix() * sigma.as_matrix()));
        let omega = sigma_sq.scale(beta);
        Ok(WishartParams {
            beta,
            sigma,
            sigma_sq,
            m,
            v0,
            omega,
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn sigma_sq(&self) -> &SymMatrix {
        &self.sigma_sq
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn v0(&self) -> &SpdMatrix {
        &self.v0
    }

    pub fn omega(&self) -> &SymMatrix {
        &self.omega
    }

    /// Same dynamics started from `v0`.
    pub fn with_v0(&self, v0: SpdMatrix) -> Result<Self> {
        Self::new(self.beta, self.sigma.clone(), self.m.clone(), v0)
    }

    /// `𝖠 = I ⊗ m + m ⊗ I`, the generator of `vec(v)` drift.
    pub fn kron_generator(&self) -> DMatrix<f64> {
        let id = DMatrix::<f64>::identity(self.n(), self.n());
        kron(&id, &self.m) + kron(&self.m, &id)
    }

    /// `ς_t = ∫₀ᵗ e^{sm} σ² e^{smᵀ} ds`, obtained from the block exponential
    /// `exp([[𝖠, vec σ²], [0, 0]]·t)` whose corner is `𝖠⁻¹(e^{𝖠t} − I)vec σ²`.
    pub fn varsigma(&self, t: f64) -> SymMatrix {
        let n = self.n();
        if t == 0.0 {
            return SymMatrix::zeros(n);
        }
        let nn = n * n;
        let a = self.kron_generator();
        let b = vec(self.sigma_sq.as_matrix());
        let mut aug = DMatrix::<f64>::zeros(nn + 1, nn + 1);
        aug.view_mut((0, 0), (nn, nn)).copy_from(&(a * t));
        aug.view_mut((0, nn), (nn, 1)).copy_from(&(b * t));
        let e = mat_exp(&aug);
        let corner = DVector::from_iterator(nn, (0..nn).map(|i| e[(i, nn)]));
        SymMatrix::symmetrize(&crate::numerics::unvec(&corner, n))
    }

    /// `E[v_t | v_0 = start] = e^{mt} start e^{mᵀt} + β ς_t`.
    pub fn conditional_mean(&self, t: f64, start: &SymMatrix) -> SymMatrix {
        let e = mat_exp(&(&self.m * t));
        let drift = &e * start.as_matrix() * e.transpose();
        SymMatrix::symmetrize(&(drift + self.varsigma(t).as_matrix() * self.beta))
    }
}

/// Coefficients of `E[tr(u v_t)] = tr[a0 v_0] + b0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMean {
    pub a0: DMatrix<f64>,
    pub b0: f64,
}

impl TraceMean {
    pub fn apply(&self, v: &DMatrix<f64>) -> f64 {
        trace_of_product(&self.a0, v) + self.b0
    }
}

/// `a0 = e^{mᵀt} u e^{mt}` (equivalently `vec(a0ᵀ) = e^{𝖠ᵀt} vec(uᵀ)`) and
/// `b0 = vec(uᵀ)ᵀ 𝖠⁻¹(e^{𝖠t} − I) vec(ω) = β·tr[u ς_t]`.
pub fn trace_mean_coeffs(p: &WishartParams, u: &DMatrix<f64>, t: f64) -> TraceMean {
    let e = mat_exp(&(p.m() * t));
    let a0 = e.transpose() * u * &e;
    let b0 = p.beta() * trace_of_product(u, p.varsigma(t).as_matrix());
    TraceMean { a0, b0 }
}

/// The `dt` coefficient of `d⟨tr(h1 v), tr(h2 v)⟩` at state `v`:
/// `tr[(h1 + h1ᵀ) v (h2 + h2ᵀ) σ²]`.
pub fn quadratic_covariation(
    p: &WishartParams,
    h1: &DMatrix<f64>,
    h2: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> f64 {
    let s1 = h1 + h1.transpose();
    let s2 = h2 + h2.transpose();
    trace_of_product(&(s1 * v * s2), p.sigma_sq().as_matrix())
}

/// An MGF evaluation with its logarithm and determinant phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformPoint {
    pub value: Complex64,
    /// Continuous-branch logarithm of `value` given the principal determinant logs.
    pub log_value: Complex64,
    /// Summed principal argument of the eigenvalues of `I − 2ςθ`.
    pub det_phase: f64,
}

/// Value of the MGF derivative along `θ₂` and the factor `g₁ + g₂ + g₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfDerivative {
    pub g: Complex64,
    pub phi: TransformPoint,
    pub value: Complex64,
}

/// `ς_t`, `ϑ_t` and the exponential `e^{mt}` for a horizon and a starting state.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    t: f64,
    beta: f64,
    varsigma: SpdMatrix,
    vartheta: DMatrix<f64>,
    exp_mt: DMatrix<f64>,
    start: SymMatrix,
    kron_generator: DMatrix<f64>,
}

/// `ς_t` counts as singular when its smallest eigenvalue falls below this
/// fraction of its largest one or of the largest eigenvalue of `σ²`.
const HORIZON_RCOND: f64 = 1e-14;

impl ConditionalMoments {
    /// Moments of `v_t` given `v_0` from the parameters.
    pub fn new(p: &WishartParams, t: f64) -> Result<Self> {
        Self::from_state(p, t, p.v0().as_sym())
    }

    /// Moments of `v_{s+t}` given `v_s = start`.
    pub fn from_state(p: &WishartParams, t: f64, start: &SymMatrix) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: "horizon must be positive and finite",
            });
        }
        if start.dim() != p.n() {
            return Err(Error::DimensionMismatch {
                expected: p.n(),
                found: start.dim(),
            });
        }
        let varsigma = p.varsigma(t);
        let spec = spectral_decomp(&varsigma);
        let lmax = spec.values[0];
        let lmin = spec.values[spec.values.len() - 1];
        let scale = crate::numerics::max_eigenvalue(p.sigma_sq());
        if !(lmin > HORIZON_RCOND * lmax) || !(lmin > HORIZON_RCOND * scale) {
            return Err(Error::SingularHorizon);
        }
        let varsigma = SpdMatrix::new(varsigma).map_err(|_| Error::SingularHorizon)?;
        let exp_mt = mat_exp(&(p.m() * t));
        let drift = &exp_mt * start.as_matrix() * exp_mt.transpose();
        let vartheta = solve(varsigma.as_matrix(), &drift).map_err(|_| Error::SingularHorizon)?;
        if vartheta.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularHorizon);
        }
        Ok(ConditionalMoments {
            t,
            beta: p.beta(),
            varsigma,
            vartheta,
            exp_mt,
            start: start.clone(),
            kron_generator: p.kron_generator(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.varsigma.dim()
    }

    pub fn varsigma(&self) -> &SpdMatrix {
        &self.varsigma
    }

    pub fn vartheta(&self) -> &DMatrix<f64> {
        &self.vartheta
    }

    pub fn exp_mt(&self) -> &DMatrix<f64> {
        &self.exp_mt
    }

    pub fn start(&self) -> &SymMatrix {
        &self.start
    }

    pub fn kron_generator(&self) -> &DMatrix<f64> {
        &self.kron_generator
    }

    /// Sup of `ν ≥ 0` with `I − 2νς·dir` positive definite; `∞` when `dir ⪯ 0`.
    pub fn mgf_domain_bound(&self, dir: &SymMatrix) -> Result<f64> {
        let root = matrix_sqrt(&self.varsigma)?;
        let k = SymMatrix::symmetrize(&(root.as_matrix() * dir.as_matrix() * root.as_matrix()));
        let lmax = spectral_decomp(&k).values[0];
        if lmax <= 0.0 {
            Ok(f64::INFINITY)
        } else {
            Ok(0.5 / lmax)
        }
    }

    fn check_real_domain(&self, theta: &DMatrix<Complex64>) -> Result<()> {
        if theta.iter().all(|z| z.im == 0.0) {
            let re = SymMatrix::symmetrize(&theta.map(|z| z.re));
            if self.mgf_domain_bound(&re)? <= 1.0 {
                return Err(Error::OutOfDomain);
            }
        }
        Ok(())
    }

    /// `Φ(θ) = etr(ϑᵀ ςθ (I − 2ςθ)⁻¹) / det(I − 2ςθ)^{β/2}`.
    pub fn mgf(&self, theta: &DMatrix<Complex64>) -> Result<TransformPoint> {
        let (point, _) = self.mgf_with_resolvent(theta)?;
        Ok(point)
    }

    /// Real symmetric argument, real result.
    pub fn mgf_real(&self, theta: &SymMatrix) -> Result<f64> {
        Ok(self.mgf(&complexify(theta.as_matrix()))?.value.re)
    }

    fn mgf_with_resolvent(
        &self,
        theta: &DMatrix<Complex64>,
    ) -> Result<(TransformPoint, DMatrix<Complex64>)> {
        let n = self.n();
        if theta.nrows() != n || theta.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: theta.nrows(),
            });
        }
        self.check_real_domain(theta)?;
        let vs = complexify(self.varsigma.as_matrix());
        let vs_theta = &vs * theta;
        let id = DMatrix::<Complex64>::identity(n, n);
        let core = &id - &vs_theta * Complex64::new(2.0, 0.0);
        let resolvent = solve(&core, &id)?;
        let det = crate::numerics::complex_log_det_power(&core, 0.5 * self.beta)?;
        let vt = complexify(&self.vartheta.transpose());
        let exponent = (vt * &vs_theta * &resolvent).trace();
        let log_value = exponent - Complex64::new(det.log_abs, 0.5 * self.beta * det.phase);
        Ok((
            TransformPoint {
                value: log_value.exp(),
                log_value,
                det_phase: det.phase,
            },
            resolvent,
        ))
    }

    /// `∂/∂ν Φ(θ₁ + νθ₂) = (g₁ + g₂ + g₃)·Φ(θ₁ + νθ₂)`.
    pub fn mgf_derivative(
        &self,
        theta1: &DMatrix<Complex64>,
        theta2: &DMatrix<Complex64>,
        nu: Complex64,
    ) -> Result<MgfDerivative> {
        let theta = theta1 + theta2 * nu;
        let (phi, resolvent) = self.mgf_with_resolvent(&theta)?;
        let vs = complexify(self.varsigma.as_matrix());
        let vt = complexify(&self.vartheta.transpose());
        let two = Complex64::new(2.0, 0.0);
        let step = &vs * theta2 * &resolvent;
        let g1 = (&vt * &step).trace();
        let g2 = (&vt * &vs * &theta * &resolvent * &step).trace() * two;
        let g3 = step.trace() * self.beta;
        let g = g1 + g2 + g3;
        Ok(MgfDerivative {
            g,
            phi,
            value: g * phi.value,
        })
    }

    /// Eigenbasis of `θ = w·dir` for fast evaluation along a complex line.
    pub fn line(&self, dir: &SymMatrix) -> Result<MgfLine> {
        MgfLine::new(self, dir)
    }
}

/// Precomputed eigen-structure of `ς^{1/2} dir ς^{1/2} = QΛQᵀ`, giving
/// `Φ(w·dir)` in `O(n)` and its derivatives in `O(n²)` per complex `w`.
#[derive(Debug, Clone)]
pub struct MgfLine {
    beta: f64,
    lambda: Vec<f64>,
    /// `Qᵀ ς^{-1/2} ϑᵀ ς^{1/2} Q`.
    e: DMatrix<f64>,
    /// `ς^{1/2} Q`.
    basis: DMatrix<f64>,
}

impl MgfLine {
    fn new(cm: &ConditionalMoments, dir: &SymMatrix) -> Result<Self> {
        let root = matrix_sqrt(cm.varsigma())?;
        let s = root.as_matrix();
        let k = SymMatrix::symmetrize(&(s * dir.as_matrix() * s));
        let spec = spectral_decomp(&k);
        let q = &spec.vectors;
        let basis = s * q;
        // ς^{-1/2} ϑᵀ ς^{1/2} = ς^{-1/2}·(ς^{-1}·drift)ᵀ·ς^{1/2} = ς^{-1/2} drift ς^{-1/2}
        let inner = solve(s, &(cm.vartheta().transpose() * s))?;
        let e = q.transpose() * inner * q;
        Ok(MgfLine {
            beta: cm.beta(),
            lambda: spec.values.iter().copied().collect(),
            e,
            basis,
        })
    }

    /// Eigenvalues `λ` of the whitened direction, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    /// Weights `Eⱼⱼ` of the exponential part.
    pub fn exponent_weights(&self) -> Vec<f64> {
        (0..self.lambda.len()).map(|j| self.e[(j, j)]).collect()
    }

    /// `Qᵀ ς^{1/2} u ς^{1/2} Q` for a second direction `u`.
    pub fn project(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.basis.transpose() * u * &self.basis
    }

    /// Largest real `w ≥ 0` in the MGF domain (`∞` if the direction is ⪯ 0).
    pub fn domain_bound(&self) -> f64 {
        let lmax = self.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lmax <= 0.0 {
            f64::INFINITY
        } else {
            0.5 / lmax
        }
    }

    /// `Φ(w·dir)`.
    pub fn value(&self, w: Complex64) -> Result<TransformPoint> {
        Ok(self.evaluate(w, None)?.0)
    }

    /// `g₁ + g₂ + g₃` for `θ = w·dir` and `θ₂ = w2·u`, with `projected = project(u)`.
    pub fn derivative_factor(&self, w: Complex64, w2: Complex64, projected: &DMatrix<f64>) -> Complex64 {
        let n = self.lambda.len();
        let one = Complex64::new(1.0, 0.0);
        let mut buf = Resolvent::new(n);
        for (j, &l) in self.lambda.iter().enumerate() {
            buf.set(j, (one - w * (2.0 * l)).inv());
        }
        self.factor_from(&buf, w, w2, projected)
    }

    /// `Φ(w·dir)` together with `g₁ + g₂ + g₃` for `θ₂ = w2·u`.
    pub fn value_and_derivative(
        &self,
        w: Complex64,
        w2: Complex64,
        projected: &DMatrix<f64>,
    ) -> Result<(TransformPoint, Complex64)> {
        let (point, g) = self.evaluate(w, Some((w2, projected)))?;
        Ok((point, g.unwrap_or_default()))
    }

    fn factor_from(&self, d: &Resolvent, w: Complex64, w2: Complex64, projected: &DMatrix<f64>) -> Complex64 {
        let n = self.lambda.len();
        let mut g1 = Complex64::new(0.0, 0.0);
        let mut g2 = Complex64::new(0.0, 0.0);
        let mut g3 = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let dj = d.get(j);
            let mut row1 = Complex64::new(0.0, 0.0);
            let mut row2 = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let eg = self.e[(j, k)] * projected[(k, j)];
                row1 += eg;
                row2 += d.get(k) * eg;
            }
            // Σ_k E_jk G_kj D_jj and Σ_k λ_j D_jj E_jk G_kj D_kk, with D diagonal
            g1 += dj * row1.re;
            g2 += dj * row2 * self.lambda[j];
            g3 += dj * projected[(j, j)];
        }
        w2 * g1 + w * w2 * g2 * 2.0 + w2 * g3 * self.beta
    }

    fn evaluate(
        &self,
        w: Complex64,
        second: Option<(Complex64, &DMatrix<f64>)>,
    ) -> Result<(TransformPoint, Option<Complex64>)> {
        let one = Complex64::new(1.0, 0.0);
        let n = self.lambda.len();
        let mut exponent = Complex64::new(0.0, 0.0);
        let mut log_abs = 0.0;
        let mut phase = 0.0;
        let mut d = Resolvent::new(n);
        for (j, &l) in self.lambda.iter().enumerate() {
            let f = one - w * (2.0 * l);
            if w.im == 0.0 && !(f.re > 0.0) {
                return Err(Error::OutOfDomain);
            }
            let r = f.norm();
            if !(r > f64::MIN_POSITIVE) || !r.is_finite() {
                return Err(Error::SingularMatrix);
            }
            log_abs += libm::log(r);
            phase += f.arg();
            let inv = f.inv();
            d.set(j, inv);
            exponent += w * (self.e[(j, j)] * l) * inv;
        }
        let half_beta = 0.5 * self.beta;
        let log_value = exponent - Complex64::new(half_beta * log_abs, half_beta * phase);
        let point = TransformPoint {
            value: log_value.exp(),
            log_value,
            det_phase: phase,
        };
        let g = second.map(|(w2, proj)| self.factor_from(&d, w, w2, proj));
        Ok((point, g))
    }
}

/// Diagonal `(1 − 2wλⱼ)⁻¹`, on the stack for small dimensions.
struct Resolvent {
    small: [Complex64; 8],
    large: Vec<Complex64>,
}

impl Resolvent {
    #[inline]
    fn new(n: usize) -> Self {
        Resolvent {
            small: [Complex64::new(0.0, 0.0); 8],
            large: if n > 8 { alloc::vec![Complex64::new(0.0, 0.0); n] } else { Vec::new() },
        }
    }

    #[inline]
    fn set(&mut self, j: usize, v: Complex64) {
        if self.large.is_empty() {
            self.small[j] = v;
        } else {
            self.large[j] = v;
        }
    }

    #[inline]
    fn get(&self, j: usize) -> Complex64 {
        if self.large.is_empty() {
            self.small[j]
        } else {
            self.large[j]
        }
    }
}

/// Convenience wrapper: `Φ(t, θ, v₀)`.
pub fn mgf(p: &WishartParams, t: f64, theta: &DMatrix<Complex64>) -> Result<Complex64> {
    Ok(ConditionalMoments::new(p, t)?.mgf(theta)?.value)
}

//! Cumulants of the option payoff variable `Y_T = b4 + tr[a4 v_T]` and three
//! fast approximations of `E[(Y_T)₊]`: Gaussian perturbation, independent
//! noncentral chi-squared projections, and a gamma perturbation.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    integrate, noncentral_chisq_cf, noncentral_chisq_pdf, normal_cdf, normal_pdf, pochhammer,
    regularized_gamma_lower, regularized_gamma_upper, spectral_decomp, QuadratureConfig, SymMatrix,
};
use crate::pricing::{expected_positive_part, PayoffCoeffs};
use crate::wishart::ConditionalMoments;

/// `κ₁, …, κ_J` of `Y_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSet {
    pub kappas: Vec<f64>,
    pub b4: f64,
    pub horizon: f64,
}

impl CumulantSet {
    pub fn kappa(&self, j: usize) -> f64 {
        self.kappas[j - 1]
    }

    pub fn moments(&self) -> Vec<f64> {
        moments_from_cumulants(&self.kappas)
    }
}

/// `κ_j = b4·δ_{j1} + β(j−1)!2^{j−1} tr[(ς a4)ʲ] + j!2^{j−1} tr[ϑᵀ(ς a4)ʲ]`.
pub fn cumulants(cm: &ConditionalMoments, payoff: &PayoffCoeffs, order: usize) -> CumulantSet {
    let step = cm.varsigma().as_matrix() * payoff.a4.as_matrix();
    let theta_t = cm.vartheta().transpose();
    let mut power = DMatrix::<f64>::identity(cm.n(), cm.n());
    let mut fact = 1.0; // (j−1)!
    let mut kappas = Vec::with_capacity(order);
    for j in 1..=order {
        power = &power * &step;
        let two = libm::pow(2.0, (j - 1) as f64);
        let tr = power.trace();
        let tr_theta = (&theta_t * &power).trace();
        let mut k = cm.beta() * fact * two * tr + fact * j as f64 * two * tr_theta;
        if j == 1 {
            k += payoff.b4;
        }
        kappas.push(k);
        fact *= j as f64;
    }
    CumulantSet {
        kappas,
        b4: payoff.b4,
        horizon: cm.t(),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Incomplete Bell polynomials `B_{n,k}(x₁, …, x_{n−k+1})` for `0 ≤ k ≤ n ≤ order`,
/// by `B_{n,k} = Σᵢ C(n−1, i−1) xᵢ B_{n−i,k−1}`.
pub fn bell_table(x: &[f64]) -> Vec<Vec<f64>> {
    let order = x.len();
    let mut b = alloc::vec![alloc::vec![0.0; order + 1]; order + 1];
    b[0][0] = 1.0;
    for n in 1..=order {
        for k in 1..=n {
            let mut acc = 0.0;
            for i in 1..=(n - k + 1) {
                acc += binomial(n - 1, i - 1) * x[i - 1] * b[n - i][k - 1];
            }
            b[n][k] = acc;
        }
    }
    b
}

/// Raw moments `μ₁..μ_J` from cumulants: `μ_j = Σ_k B_{j,k}(κ)`.
pub fn moments_from_cumulants(kappas: &[f64]) -> Vec<f64> {
    let b = bell_table(kappas);
    (1..=kappas.len()).map(|j| b[j][1..=j].iter().sum()).collect()
}

/// Inverse of [`moments_from_cumulants`].
pub fn cumulants_from_moments(moments: &[f64]) -> Vec<f64> {
    let order = moments.len();
    let mu = |j: usize| if j == 0 { 1.0 } else { moments[j - 1] };
    let mut kappas: Vec<f64> = Vec::with_capacity(order);
    for n in 1..=order {
        let mut k = mu(n);
        for m in 1..n {
            k -= binomial(n - 1, m - 1) * kappas[m - 1] * mu(n - m);
        }
        kappas.push(k);
    }
    kappas
}

fn check_variance(k2: f64) -> Result<()> {
    if !(k2 > 0.0) || !k2.is_finite() {
        return Err(Error::DegenerateVariance);
    }
    Ok(())
}

/// `(η₀, η₁, η₂, η₃)` of the third-order Gaussian perturbation.
fn gaussian_etas(k2: f64, k3: f64) -> [f64; 4] {
    [1.0, -3.0 * k3 / (6.0 * k2 * k2), 0.0, k3 / (6.0 * k2 * k2 * k2)]
}

/// Perturbed Gaussian density `φ(z; κ₁, κ₂)·Σ ηⱼ (z − κ₁)ʲ`.
pub fn gaussian_density(z: f64, k1: f64, k2: f64, k3: f64) -> f64 {
    let eta = gaussian_etas(k2, k3);
    let sd = libm::sqrt(k2);
    let x = z - k1;
    let poly = eta[0] + x * (eta[1] + x * (eta[2] + x * eta[3]));
    normal_pdf(x / sd) / sd * poly
}

/// `E[(Y)₊] ≈ Σⱼ ηⱼ ξ_{j+1} + κ₁ Σⱼ ηⱼ ξⱼ`.
pub fn gaussian_expectation_positive(k1: f64, k2: f64, k3: f64) -> Result<f64> {
    check_variance(k2)?;
    let sd = libm::sqrt(k2);
    let d = k1 / sd;
    let big_n = normal_cdf(d);
    let xi1 = sd * normal_pdf(d);
    let xi = [
        big_n,
        xi1,
        k2 * big_n - xi1 * k1,
        xi1 * (k1 * k1 + 2.0 * k2),
        3.0 * k2 * k2 * big_n - xi1 * (k1 * k1 * k1 + 3.0 * k2 * k1),
    ];
    let eta = gaussian_etas(k2, k3);
    let mut out = 0.0;
    for j in 0..4 {
        out += eta[j] * xi[j + 1] + k1 * eta[j] * xi[j];
    }
    Ok(out)
}

/// One rank-one projection `λ·γᵀvγ` with `γᵀvγ / scale ~ χ²(β, δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralComponent {
    pub lambda: f64,
    pub direction: Vec<f64>,
    /// `γᵀ ς_T γ`.
    pub scale: f64,
    /// `γᵀ e^{mT} v_t e^{mᵀT} γ / γᵀ ς_T γ`.
    pub noncentrality: f64,
    /// Set when the raw noncentrality came out negative and was lifted to zero.
    pub clamped: bool,
}

/// `b4 + Σ λᵢ scaleᵢ χᵢ²` with the projections treated as independent.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSurrogate {
    pub b4: f64,
    pub dof: f64,
    pub components: Vec<SpectralComponent>,
}

pub fn spectral_surrogate(cm: &ConditionalMoments, payoff: &PayoffCoeffs) -> SpectralSurrogate {
    let spec = spectral_decomp(&payoff.a4);
    let s = cm.varsigma().as_matrix();
    let e = cm.exp_mt();
    let drift = e * cm.start().as_matrix() * e.transpose();
    let components = (0..spec.values.len())
        .map(|i| {
            let g = spec.vectors.column(i);
            let scale = (g.transpose() * s * g)[(0, 0)];
            let raw = (g.transpose() * &drift * g)[(0, 0)] / scale;
            SpectralComponent {
                lambda: spec.values[i],
                direction: g.iter().copied().collect(),
                scale,
                noncentrality: raw.max(0.0),
                clamped: raw < 0.0,
            }
        })
        .collect();
    SpectralSurrogate {
        b4: payoff.b4,
        dof: cm.beta(),
        components,
    }
}

impl SpectralSurrogate {
    /// `Σ λᵢ γᵢγᵢᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.components.len();
        let mut out = DMatrix::<f64>::zeros(n, n);
        for c in &self.components {
            let g = nalgebra::DVector::from_column_slice(&c.direction);
            out += &g * g.transpose() * c.lambda;
        }
        SymMatrix::symmetrize(&out)
    }

    pub fn mean(&self) -> f64 {
        self.b4
            + self
                .components
                .iter()
                .map(|c| c.lambda * c.scale * (self.dof + c.noncentrality))
                .sum::<f64>()
    }

    /// `e^{iwb4} Πᵢ CF_{χ²(β,δᵢ)}(w λᵢ scaleᵢ)`.
    pub fn cf(&self, w: Complex64) -> Complex64 {
        let mut out = (Complex64::new(0.0, 1.0) * w * self.b4).exp();
        for c in &self.components {
            out *= noncentral_chisq_cf(w * (c.lambda * c.scale), self.dof, c.noncentrality);
        }
        out
    }

    /// Largest `|z_i|` keeping every factor's exponential moment finite.
    pub fn damping_bound(&self) -> f64 {
        let top = self
            .components
            .iter()
            .map(|c| c.lambda * c.scale)
            .fold(0.0, f64::max);
        if top <= 0.0 {
            f64::INFINITY
        } else {
            0.5 / top
        }
    }

    pub fn any_clamped(&self) -> bool {
        self.components.iter().any(|c| c.clamped)
    }

    /// Same surrogate keeping only component `i`.
    pub fn restricted_to(&self, i: usize) -> SpectralSurrogate {
        SpectralSurrogate {
            b4: self.b4,
            dof: self.dof,
            components: alloc::vec![self.components[i].clone()],
        }
    }
}

/// `E[(Ỹ)₊]` from the damped Fourier integral of the surrogate's characteristic function.
pub fn spectral_price(s: &SpectralSurrogate, damping: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if s.components.iter().all(|c| c.lambda == 0.0) {
        return Ok(s.b4.max(0.0));
    }
    let bound = s.damping_bound();
    if -damping >= bound {
        return Err(Error::DampingOutOfDomain { damping, bound });
    }
    Ok(expected_positive_part(|w| Ok((s.cf(w), 0.0)), damping, cfg)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleEigPrice {
    pub value: f64,
    /// Index of the component used.
    pub component: usize,
    /// `max |λ_other| / |λ_dominant|`.
    pub dominance_ratio: f64,
}

impl SingleEigPrice {
    /// Whether the dominance ratio is within the 0.5 threshold.
    pub fn dominant(&self) -> bool {
        self.dominance_ratio <= 0.5
    }
}

/// `E[(b4 + λ·scale·X)₊]`, `X ~ χ²(β, δ)`, for the largest-magnitude eigenvalue,
/// by quadrature against the noncentral chi-squared density.
pub fn single_eig_price(s: &SpectralSurrogate, cfg: &QuadratureConfig) -> Result<SingleEigPrice> {
    let (idx, dom) = s
        .components
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.lambda.abs().total_cmp(&b.1.lambda.abs()))
        .ok_or(Error::InvalidParameter {
            name: "surrogate",
            reason: "no components",
        })?;
    let lead = dom.lambda.abs();
    let other = s
        .components
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, c)| c.lambda.abs())
        .fold(0.0, f64::max);
    let dominance_ratio = if lead > 0.0 { other / lead } else { f64::INFINITY };
    let value = single_component_value(s.b4, dom.lambda * dom.scale, s.dof, dom.noncentrality, cfg)?;
    Ok(SingleEigPrice {
        value,
        component: idx,
        dominance_ratio,
    })
}

fn single_component_value(b4: f64, slope: f64, dof: f64, delta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if slope == 0.0 {
        return Ok(b4.max(0.0));
    }
    let mean = dof + delta;
    let fin = QuadratureConfig {
        abs_tol: cfg.abs_tol * 1e-2,
        rel_tol: cfg.rel_tol * 1e-2,
        ..*cfg
    };
    let payoff = |x: f64| (b4 + slope * x) * noncentral_chisq_pdf(x, dof, delta);
    let x0 = -b4 / slope;
    if slope > 0.0 {
        if x0 <= 0.0 {
            return Ok(b4 + slope * mean);
        }
        // the density decays like e^{−x/2}; beyond this point the mass is below 1e-18
        let sd = libm::sqrt(2.0 * (dof + 2.0 * delta));
        let top = x0.max(mean) + 40.0 * sd + 100.0;
        if x0 >= top {
            return Ok(0.0);
        }
        integrate(payoff, x0, top, &fin)
    } else {
        if x0 <= 0.0 {
            return Ok(0.0);
        }
        integrate(payoff, 0.0, x0, &fin)
    }
}

/// Whether every eigenvalue of the payoff matrix is positive or every one is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenSign {
    Positive,
    Negative,
}

pub fn eigen_sign(a4: &SymMatrix) -> Result<EigenSign> {
    let values = spectral_decomp(a4).values;
    if values.iter().all(|&l| l > 0.0) {
        Ok(EigenSign::Positive)
    } else if values.iter().all(|&l| l < 0.0) {
        Ok(EigenSign::Negative)
    } else {
        Err(Error::MixedEigenvalues)
    }
}

/// Third-order gamma expansion of the density of `Z = Y − k ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSurrogate {
    pub k: f64,
    pub alpha_bar: f64,
    pub beta_bar: f64,
    /// `c₀..c₃`.
    pub c: [f64; 4],
    /// `h[j][i]`: coefficient of `xⁱ` in the orthonormal polynomial `H_j`.
    pub h: [[f64; 4]; 4],
    /// `E[Zⁱ]` for `i = 1, 2, 3`.
    pub shifted_moments: [f64; 3],
}

impl GammaSurrogate {
    /// Fits the expansion to the first three raw moments of `Y` with shift `k`.
    pub fn fit(moments: &[f64], k: f64) -> Result<Self> {
        if moments.len() < 3 {
            return Err(Error::InvalidParameter {
                name: "moments",
                reason: "three moments are required",
            });
        }
        let mu = |j: usize| if j == 0 { 1.0 } else { moments[j - 1] };
        let mut mz = [0.0; 3];
        for (i, slot) in mz.iter_mut().enumerate() {
            let i = i + 1;
            *slot = (0..=i)
                .map(|j| binomial(i, j) * libm::pow(-1.0, j as f64) * mu(i - j) * libm::pow(k, j as f64))
                .sum();
        }
        let var = mz[1] - mz[0] * mz[0];
        if !(var > 0.0) || !(mz[0] > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let a = mz[0] * mz[0] / var - 1.0;
        let b = mz[0] / var;
        let c3 = (a + 1.0) * ((a + 2.0) * (a + 3.0) - (a + 1.0) * (a + 1.0) * mz[2] / (mz[0] * mz[0] * mz[0]))
            / (libm::sqrt(6.0) * libm::sqrt((a + 1.0) * (a + 2.0) * (a + 3.0)));
        let raw = [
            [1.0, 0.0, 0.0, 0.0],
            [a + 1.0, -1.0, 0.0, 0.0],
            [0.5 * (a * a + 3.0 * a + 2.0), -(a + 2.0), 0.5, 0.0],
            [
                (a * a * a + 6.0 * a * a + 11.0 * a + 6.0) / 6.0,
                -0.5 * (a * a + 5.0 * a + 6.0),
                0.5 * (a + 3.0),
                -1.0 / 6.0,
            ],
        ];
        let mut h = [[0.0; 4]; 4];
        let mut norm_sq: f64 = 1.0;
        for j in 0..4 {
            if j > 0 {
                norm_sq *= (j as f64 + a) / j as f64;
            }
            let norm = libm::sqrt(norm_sq);
            for i in 0..4 {
                h[j][i] = raw[j][i] / norm;
            }
        }
        Ok(GammaSurrogate {
            k,
            alpha_bar: a,
            beta_bar: b,
            c: [1.0, 0.0, 0.0, c3],
            h,
            shifted_moments: mz,
        })
    }

    /// Polynomial factor `Σⱼ cⱼ Hⱼ(x)`.
    fn poly(&self, x: f64) -> f64 {
        let mut out = 0.0;
        for j in 0..4 {
            let hj = self.h[j][0] + x * (self.h[j][1] + x * (self.h[j][2] + x * self.h[j][3]));
            out += self.c[j] * hj;
        }
        out
    }

    /// Approximate density of `Z` at `z ≥ 0`.
    pub fn density(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let x = self.beta_bar * z;
        let a = self.alpha_bar;
        let log_w = a * libm::log(x) - x - libm::lgamma(1.0 + a);
        libm::exp(log_w) * self.poly(x) * self.beta_bar
    }

    fn sum_terms<F>(&self, k: f64, incomplete: F) -> Result<f64>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let a = self.alpha_bar;
        let x = -self.beta_bar * k;
        let mut out = 0.0;
        for j in 0..4 {
            if self.c[j] == 0.0 {
                continue;
            }
            for i in 0..=j {
                let w = self.c[j] * self.h[j][i];
                out += w / self.beta_bar * pochhammer(a + 1.0, i as u32 + 1) * incomplete(a + i as f64 + 2.0, x)?;
                out += w * k * pochhammer(a + 1.0, i as u32) * incomplete(a + i as f64 + 1.0, x)?;
            }
        }
        Ok(out)
    }

    /// `E[(Z + k)₊]` for `k < 0`, with upper regularized gamma terms.
    pub fn call_value(&self) -> Result<f64> {
        self.sum_terms(self.k, regularized_gamma_upper)
    }

    /// `E[(−(Z + k))₊]` for `k < 0`, with lower regularized gamma terms.
    pub fn put_value(&self) -> Result<f64> {
        Ok(-self.sum_terms(self.k, regularized_gamma_lower)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaPrice {
    pub value: f64,
    pub sign: EigenSign,
    /// `None` when the payoff sign is certain and no expansion is needed.
    pub surrogate: Option<GammaSurrogate>,
}

/// `E[(Y)₊]` from the gamma expansion with shift `k = b4` (all-positive
/// eigenvalues) or, on the mirrored variable `−Y`, `k = −b4` (all-negative).
pub fn gamma_price(moments: &[f64], sign: EigenSign, b4: f64) -> Result<GammaPrice> {
    if moments.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "moments",
            reason: "three moments are required",
        });
    }
    check_variance(moments[1] - moments[0] * moments[0])?;
    match sign {
        EigenSign::Positive => {
            if b4 >= 0.0 {
                // Y > 0 almost surely
                return Ok(GammaPrice {
                    value: moments[0],
                    sign,
                    surrogate: None,
                });
            }
            let g = GammaSurrogate::fit(moments, b4)?;
            Ok(GammaPrice {
                value: g.call_value()?,
                sign,
                surrogate: Some(g),
            })
        }
        EigenSign::Negative => {
            if b4 <= 0.0 {
                // Y < 0 almost surely
                return Ok(GammaPrice {
                    value: 0.0,
                    sign,
                    surrogate: None,
                });
            }
            let mirrored = [-moments[0], moments[1], -moments[2]];
            let g = GammaSurrogate::fit(&mirrored, -b4)?;
            Ok(GammaPrice {
                value: g.put_value()?,
                sign,
                surrogate: Some(g),
            })
        }
    }
}

/// All approximations for one contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationSet {
    pub cumulants: CumulantSet,
    pub gaussian: f64,
    pub spectral: f64,
    pub single_eig: SingleEigPrice,
    /// `Err` when the eigenvalues of `a4` have mixed signs.
    pub gamma: core::result::Result<GammaPrice, Error>,
    pub surrogate: SpectralSurrogate,
}

/// Evaluates every approximation of `E[(Y_T)₊]`; the gamma one falls back to
/// an error value (not a failure) when its sign condition does not hold.
pub fn approximate_all(
    cm: &ConditionalMoments,
    payoff: &PayoffCoeffs,
    damping: f64,
    cfg: &QuadratureConfig,
) -> Result<ApproximationSet> {
    let ks = cumulants(cm, payoff, 3);
    let gaussian = gaussian_expectation_positive(ks.kappa(1), ks.kappa(2), ks.kappa(3))?;
    let surrogate = spectral_surrogate(cm, payoff);
    let spectral = spectral_price(&surrogate, damping, cfg)?;
    let single_eig = single_eig_price(&surrogate, cfg)?;
    let gamma = eigen_sign(&payoff.a4).and_then(|sign| gamma_price(&ks.moments(), sign, payoff.b4));
    Ok(ApproximationSet {
        cumulants: ks,
        gaussian,
        spectral,
        single_eig,
        gamma,
        surrogate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::tests::reference_model;
    use crate::numerics::trace_of_product;
    use crate::pricing::tests::reference_contract;
    use crate::pricing::{gao_setup, DiscountCurve, PayoffTransform};

    fn base() -> (PayoffCoeffs, ConditionalMoments) {
        let mdl = reference_model();
        let v = mdl.wishart().v0().as_sym().clone();
        gao_setup(&mdl, &DiscountCurve::flat(0.0).unwrap(), 0.0, &reference_contract(), &v).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zero_payoff_matrix_has_trivial_cumulants() {
        let (_, cm) = base();
        let p = PayoffCoeffs {
            b4: 0.7,
            a4: SymMatrix::zeros(2),
        };
        let ks = cumulants(&cm, &p, 4);
        assert_eq!(ks.kappas, alloc::vec![0.7, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn first_cumulant_is_conditional_mean() {
        let (p, cm) = base();
        let ks = cumulants(&cm, &p, 3);
        let mean = reference_model().wishart().conditional_mean(2.0, cm.start());
        let expect = p.b4 + trace_of_product(p.a4.as_matrix(), mean.as_matrix());
        assert!(rel(ks.kappa(1), expect) < 1e-10);
    }

    #[test]
    fn cumulants_match_log_transform_derivatives() {
        let (p, cm) = base();
        let ks = cumulants(&cm, &p, 3);
        let tr = PayoffTransform::new(&p, &cm).unwrap();
        // K(x) = log E[e^{xY}] = log Φ_Y(−ix)
        let kgf = |x: f64| tr.cf(Complex64::new(0.0, -x)).unwrap().0.ln().re;
        let h = 2e-2;
        let d1 = (kgf(h) - kgf(-h)) / (2.0 * h);
        let d1b = (kgf(2.0 * h) - kgf(-2.0 * h)) / (4.0 * h);
        let k1 = (4.0 * d1 - d1b) / 3.0;
        let d2 = (kgf(h) - 2.0 * kgf(0.0) + kgf(-h)) / (h * h);
        let d2b = (kgf(2.0 * h) - 2.0 * kgf(0.0) + kgf(-2.0 * h)) / (4.0 * h * h);
        let k2 = (4.0 * d2 - d2b) / 3.0;
        let d3 = (kgf(2.0 * h) - 2.0 * kgf(h) + 2.0 * kgf(-h) - kgf(-2.0 * h)) / (2.0 * h * h * h);
        assert!(rel(k1, ks.kappa(1)) < 1e-4, "{k1} {}", ks.kappa(1));
        assert!(rel(k2, ks.kappa(2)) < 1e-4, "{k2} {}", ks.kappa(2));
        assert!(rel(d3, ks.kappa(3)) < 1e-3, "{d3} {}", ks.kappa(3));
    }

    #[test]
    fn classical_moment_identities() {
        let k = [0.3, 1.7, -0.4, 2.2];
        let m = moments_from_cumulants(&k);
        assert_eq!(m[0], 0.3);
        assert!((m[1] - (1.7 + 0.09)).abs() < 1e-15);
        assert!((m[2] - (-0.4 + 3.0 * 1.7 * 0.3 + 0.027)).abs() < 1e-14);
        let back = cumulants_from_moments(&m);
        for (a, b) in back.iter().zip(&k) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_without_skew_is_bachelier() {
        let (k1, k2) = (0.2, 0.5);
        let got = gaussian_expectation_positive(k1, k2, 0.0).unwrap();
        let sd = libm::sqrt(k2);
        let closed = k1 * normal_cdf(k1 / sd) + sd * normal_pdf(k1 / sd);
        assert!(rel(got, closed) < 1e-12);
        let quad = integrate(|z| z * normal_pdf((z - k1) / sd) / sd, 0.0, k1 + 40.0 * sd, &QuadratureConfig::default()).unwrap();
        assert!(rel(got, quad) < 1e-10);
        let deep = gaussian_expectation_positive(10.0, 0.01, 1e-4).unwrap();
        assert!(rel(deep, 10.0) < 1e-6);
        assert!(matches!(gaussian_expectation_positive(1.0, 0.0, 0.0), Err(Error::DegenerateVariance)));
    }

    #[test]
    fn gaussian_matches_quadrature_of_its_density() {
        let (p, cm) = base();
        let ks = cumulants(&cm, &p, 3);
        let (k1, k2, k3) = (ks.kappa(1), ks.kappa(2), ks.kappa(3));
        let got = gaussian_expectation_positive(k1, k2, k3).unwrap();
        let sd = libm::sqrt(k2);
        let cfg = QuadratureConfig {
            abs_tol: 1e-16,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let quad = integrate(|z| z * gaussian_density(z, k1, k2, k3), 0.0f64.max(k1 - 40.0 * sd), k1 + 40.0 * sd, &cfg).unwrap();
        assert!(rel(got, quad) < 1e-8, "{got} {quad}");
    }

    #[test]
    fn spectral_reconstruction_and_trace() {
        let (p, cm) = base();
        let s = spectral_surrogate(&cm, &p);
        let err = (s.reconstruct().as_matrix() - p.a4.as_matrix()).abs().max();
        assert!(err < 1e-12);
        let ident = PayoffCoeffs {
            b4: 0.0,
            a4: SymMatrix::identity(2),
        };
        let s = spectral_surrogate(&cm, &ident);
        let total: f64 = s.components.iter().map(|c| c.scale).sum();
        assert!(rel(total, cm.varsigma().trace()) < 1e-12);
        assert!(!s.any_clamped());
    }

    #[test]
    fn rank_one_surrogate_is_exact() {
        let (_, cm) = base();
        let g = [0.6, 0.8];
        let a4 = SymMatrix::from_row_slice(2, &[g[0] * g[0], g[0] * g[1], g[1] * g[0], g[1] * g[1]]).unwrap();
        let p = PayoffCoeffs { b4: -0.01, a4 };
        let s = spectral_surrogate(&cm, &p);
        let exact = PayoffTransform::new(&p, &cm).unwrap();
        for z in [0.3, 1.0, 7.0, 40.0] {
            let w = Complex64::new(z, -0.025);
            let a = s.cf(w);
            let b = exact.cf(w).unwrap().0;
            assert!((a - b).norm() < 1e-10 * b.norm(), "{z}: {a} {b}");
        }
    }

    #[test]
    fn spectral_mean_close_to_exact() {
        let (p, cm) = base();
        let s = spectral_surrogate(&cm, &p);
        let ks = cumulants(&cm, &p, 1);
        assert!(rel(s.mean(), ks.kappa(1)) < 0.05);
    }

    #[test]
    fn single_component_prices_agree() {
        let (_, cm) = base();
        let cfg = QuadratureConfig::default();
        for (b4, scale) in [(-0.02, 1.0), (-0.2, 1.0), (0.05, -1.0)] {
            let p = PayoffCoeffs {
                b4,
                a4: SymMatrix::from_row_slice(2, &[0.36 * scale, 0.48 * scale, 0.48 * scale, 0.64 * scale]).unwrap(),
            };
            let s = spectral_surrogate(&cm, &p);
            let single = single_eig_price(&s, &cfg).unwrap();
            let fourier = spectral_price(&s, -0.025, &cfg).unwrap();
            assert!((single.value - fourier).abs() < 1e-10 + 1e-8 * fourier.abs(), "{b4}: {} {fourier}", single.value);
            assert!(single.dominant());
        }
    }

    #[test]
    fn single_component_limits() {
        let cfg = QuadratureConfig::default();
        let s = SpectralSurrogate {
            b4: 0.1,
            dof: 3.5,
            components: alloc::vec![SpectralComponent {
                lambda: 2.0,
                direction: alloc::vec![1.0],
                scale: 0.01,
                noncentrality: 0.4,
                clamped: false,
            }],
        };
        let v = single_eig_price(&s, &cfg).unwrap().value;
        assert!((v - (0.1 + 0.02 * 3.9)).abs() < 1e-15);
        let deep = SpectralSurrogate { b4: -10.0, ..s.clone() };
        assert!(single_eig_price(&deep, &cfg).unwrap().value.abs() < 1e-12);
        let flat = SpectralSurrogate {
            components: alloc::vec![SpectralComponent { lambda: 0.0, ..s.components[0].clone() }],
            ..s
        };
        assert_eq!(spectral_price(&flat, -0.025, &cfg).unwrap(), 0.1);
    }

    #[test]
    fn gamma_coefficients_from_orthogonal_projection() {
        let (p, cm) = base();
        let ks = cumulants(&cm, &p, 3);
        let m = ks.moments();
        let mirrored = [-m[0], m[1], -m[2]];
        let g = GammaSurrogate::fit(&mirrored, -p.b4).unwrap();
        // c3 = E[H3(β̄Z)] from the moments of Z
        let mz = g.shifted_moments;
        let b = g.beta_bar;
        let ex = [1.0, b * mz[0], b * b * mz[1], b * b * b * mz[2]];
        let c3: f64 = (0..4).map(|i| g.h[3][i] * ex[i]).sum();
        assert!((c3 - g.c[3]).abs() < 1e-10 * c3.abs().max(1.0), "{c3} {}", g.c[3]);
        let c1: f64 = (0..2).map(|i| g.h[1][i] * ex[i]).sum();
        let c2: f64 = (0..3).map(|i| g.h[2][i] * ex[i]).sum();
        assert!(c1.abs() < 1e-9 && c2.abs() < 1e-9);
    }

    #[test]
    fn gamma_density_reproduces_moments_and_price() {
        let (p, cm) = base();
        let ks = cumulants(&cm, &p, 3);
        let m = ks.moments();
        let price = gamma_price(&m, EigenSign::Negative, p.b4).unwrap();
        let g = price.surrogate.clone().unwrap();
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let top = 60.0 * (g.alpha_bar + 10.0) / g.beta_bar;
        for i in 0..3 {
            let got = integrate(|z| libm::pow(z, (i + 1) as f64) * g.density(z), 0.0, top, &cfg).unwrap();
            assert!(rel(got, g.shifted_moments[i]) < 1e-6, "{i}: {got} {}", g.shifted_moments[i]);
        }
        // Y = −(Z + k) with k = −b4
        let quad = integrate(|z| (-(z + g.k)).max(0.0) * g.density(z), 0.0, -g.k, &cfg).unwrap();
        assert!(rel(price.value, quad) < 1e-8, "{} {quad}", price.value);
    }

    #[test]
    fn gamma_positive_branch_matches_quadrature() {
        // shifted gamma-like variable with a skew
        let k1: f64 = 0.5;
        let ks = [k1, 0.08, 0.01];
        let m = moments_from_cumulants(&ks);
        let price = gamma_price(&m, EigenSign::Positive, -0.3).unwrap();
        let g = price.surrogate.clone().unwrap();
        let cfg = QuadratureConfig {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let top = 60.0 * (g.alpha_bar + 10.0) / g.beta_bar;
        let quad = integrate(|z| (z + g.k).max(0.0) * g.density(z), -g.k, top, &cfg).unwrap();
        assert!(rel(price.value, quad) < 1e-8, "{} {quad}", price.value);
    }

    #[test]
    fn gamma_branch_selection_is_total() {
        let pos = SymMatrix::from_row_slice(2, &[2.0, 0.1, 0.1, 1.0]).unwrap();
        let neg = SymMatrix::from_row_slice(2, &[-2.0, 0.1, 0.1, -1.0]).unwrap();
        let mixed = SymMatrix::from_row_slice(2, &[2.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(eigen_sign(&pos).unwrap(), EigenSign::Positive);
        assert_eq!(eigen_sign(&neg).unwrap(), EigenSign::Negative);
        assert!(matches!(eigen_sign(&mixed), Err(Error::MixedEigenvalues)));
        let m = moments_from_cumulants(&[1.0, 0.1, 0.01]);
        assert_eq!(gamma_price(&m, EigenSign::Positive, 0.5).unwrap().value, 1.0);
        assert_eq!(gamma_price(&m, EigenSign::Negative, -0.5).unwrap().value, 0.0);
        assert!(matches!(
            gamma_price(&[1.0, 1.0, 1.0], EigenSign::Positive, -0.5),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn approximations_agree_deep_in_the_money() {
        let mdl = reference_model();
        let v = mdl.wishart().v0().as_sym().clone();
        let c = reference_contract().with_g(1e6).unwrap();
        let (p, cm) = gao_setup(&mdl, &DiscountCurve::flat(0.0).unwrap(), 0.0, &c, &v).unwrap();
        let cfg = QuadratureConfig::default();
        let exact = PayoffTransform::new(&p, &cm).unwrap().call(-0.025, &cfg).unwrap().value;
        let all = approximate_all(&cm, &p, -0.025, &cfg).unwrap();
        assert!(rel(all.gaussian, exact) < 1e-3);
        assert!(rel(all.spectral, exact) < 1e-3);
        assert!(rel(all.gamma.unwrap().value, exact) < 1e-3);
    }

    #[test]
    fn spectral_fourier_inverts_a_known_law() {
        // central chi-squared with 2 dof scaled by 1: E[(X − 1)₊] = 2e^{−1/2}
        let s = SpectralSurrogate {
            b4: -1.0,
            dof: 2.0,
            components: alloc::vec![SpectralComponent {
                lambda: 1.0,
                direction: alloc::vec![1.0],
                scale: 1.0,
                noncentrality: 0.0,
                clamped: false,
            }],
        };
        let got = spectral_price(&s, -0.1, &QuadratureConfig::default()).unwrap();
        assert!((got - 2.0 * libm::exp(-0.5)).abs() < 1e-9, "{got}");
    }
}

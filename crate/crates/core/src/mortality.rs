//! Linear-rational mortality: state-price density, per-annuitant intensities,
//! positivity checks and the intensity distribution by Fourier inversion.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mc::{sample_states, McConfig};
use crate::numerics::{
    integrate_semi_infinite, integrate_vec, min_eigenvalue, PhaseMonitor, trace_of_product, QuadratureConfig,
    SpdMatrix, SymMatrix,
};
use crate::wishart::{quadratic_covariation, trace_mean_coeffs, ConditionalMoments, WishartParams};

/// How the drift part of the positivity condition was established for one leg.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftCheck {
    /// `−(uᵢm + mᵀuᵢ) ⪰ 0`, so `tr[uᵢ m v] ≤ 0` for every `v ⪰ 0`.
    Proved,
    /// The symbolic condition fails; `tr[uᵢ m v] < 0` held on every sampled state.
    Sampled { samples: usize, max_value: f64 },
    /// A sampled state violated `tr[uᵢ m v] < 0`.
    Violated { samples: usize, max_value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegPositivity {
    /// `α/k − tr[uᵢω]`, must be positive.
    pub level_margin: f64,
    pub drift: DriftCheck,
}

impl LegPositivity {
    pub fn ok(&self) -> bool {
        self.level_margin > 0.0 && !matches!(self.drift, DriftCheck::Violated { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub legs: Vec<LegPositivity>,
}

impl PositivityReport {
    pub fn ok(&self) -> bool {
        self.legs.iter().all(LegPositivity::ok)
    }

    /// True when every leg passed through the symbolic condition alone.
    pub fn proved(&self) -> bool {
        self.ok() && self.legs.iter().all(|l| l.drift == DriftCheck::Proved)
    }
}

/// Intercept and slope of one leg's intensity numerator: `μᵢ = (c + tr[h v]) / (1 + tr[u₀ v])`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityLegCoeffs {
    /// `α/k − tr[uᵢω]`.
    pub c: f64,
    /// `αuᵢ − 2uᵢm`, generally not symmetric.
    pub h: DMatrix<f64>,
}

impl IntensityLegCoeffs {
    /// `(h + hᵀ)/2`, which gives the same trace against symmetric states.
    pub fn h_sym(&self) -> SymMatrix {
        SymMatrix::symmetrize(&self.h)
    }
}

#[derive(Debug, Clone)]
pub struct MortalityModel {
    wishart: WishartParams,
    legs: Vec<SymMatrix>,
    alpha: f64,
    u0: SymMatrix,
    positivity: PositivityReport,
}

const PSD_TOL: f64 = 1e-12;

impl MortalityModel {
    /// Builds the model and rejects it unless the intensities are positive.
    pub fn new(wishart: WishartParams, legs: Vec<SymMatrix>, alpha: f64) -> Result<Self> {
        let model = Self::new_unchecked(wishart, legs, alpha)?;
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: "kernel level must be positive",
            });
        }
        if !model.positivity.ok() {
            return Err(Error::InvalidParameter {
                name: "positivity",
                reason: "intensity positivity condition fails (alpha/k must exceed tr[u_i omega] and tr[u_i m v] must stay negative)",
            });
        }
        Ok(model)
    }

    /// Builds the model without rejecting it on a failed positivity check; the
    /// report stays available through [`MortalityModel::positivity`].
    pub fn new_unchecked(wishart: WishartParams, legs: Vec<SymMatrix>, alpha: f64) -> Result<Self> {
        let n = wishart.n();
        if legs.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "legs",
                reason: "at least two annuitants are required",
            });
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: "kernel level must be finite and non-negative",
            });
        }
        for u in &legs {
            if u.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: u.dim(),
                });
            }
            if !u.is_psd(PSD_TOL) {
                return Err(Error::InvalidParameter {
                    name: "legs",
                    reason: "every load matrix must be positive semidefinite",
                });
            }
        }
        let mut u0 = SymMatrix::zeros(n);
        for u in &legs {
            u0 = u0.add(u);
        }
        let mut model = MortalityModel {
            wishart,
            legs,
            alpha,
            u0,
            positivity: PositivityReport { legs: Vec::new() },
        };
        model.positivity = model.positivity_check();
        Ok(model)
    }

    pub fn wishart(&self) -> &WishartParams {
        &self.wishart
    }

    pub fn legs(&self) -> &[SymMatrix] {
        &self.legs
    }

    pub fn k(&self) -> usize {
        self.legs.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn u0(&self) -> &SymMatrix {
        &self.u0
    }

    pub fn positivity(&self) -> &PositivityReport {
        &self.positivity
    }

    /// Same legs and level over different Wishart dynamics.
    pub fn with_wishart(&self, wishart: WishartParams) -> Result<Self> {
        Self::new(wishart, self.legs.clone(), self.alpha)
    }

    fn leg(&self, i: usize) -> Result<&SymMatrix> {
        self.legs.get(i).ok_or(Error::InvalidParameter {
            name: "leg",
            reason: "leg index out of range",
        })
    }

    /// `ζ_t = e^{−αt}(1 + tr[u₀ v])`.
    pub fn state_price_density(&self, t: f64, v: &DMatrix<f64>) -> f64 {
        libm::exp(-self.alpha * t) * (1.0 + trace_of_product(self.u0.as_matrix(), v))
    }

    pub fn leg_coeffs(&self, i: usize) -> Result<IntensityLegCoeffs> {
        let u = self.leg(i)?.as_matrix();
        let c = self.alpha / self.k() as f64 - trace_of_product(u, self.wishart.omega().as_matrix());
        let h = u * self.alpha - u * self.wishart.m() * 2.0;
        Ok(IntensityLegCoeffs { c, h })
    }

    /// `μᵢ(v) = (α/k + α tr[uᵢv] − tr[uᵢω] − 2 tr[uᵢ m v]) / (1 + tr[u₀v])`.
    pub fn intensity(&self, i: usize, v: &DMatrix<f64>) -> Result<f64> {
        let lc = self.leg_coeffs(i)?;
        Ok((lc.c + trace_of_product(&lc.h, v)) / (1.0 + trace_of_product(self.u0.as_matrix(), v)))
    }

    /// Sufficient positivity conditions per leg: `α/k > tr[uᵢω]` and
    /// `tr[uᵢ m v] < 0` on `v ⪰ 0`. The latter is proved when
    /// `−(uᵢm + mᵀuᵢ) ⪰ 0` and otherwise checked on simulated states.
    pub fn positivity_check(&self) -> PositivityReport {
        let k = self.k() as f64;
        let m = self.wishart.m();
        let mut sampled: Option<Vec<DMatrix<f64>>> = None;
        let legs = self
            .legs
            .iter()
            .map(|u| {
                let level_margin =
                    self.alpha / k - trace_of_product(u.as_matrix(), self.wishart.omega().as_matrix());
                let um = u.as_matrix() * m;
                let sym = SymMatrix::symmetrize(&(-(&um + um.transpose())));
                let drift = if min_eigenvalue(&sym) >= -PSD_TOL * sym.amax().max(1.0) {
                    DriftCheck::Proved
                } else {
                    let states = sampled.get_or_insert_with(|| {
                        let cfg = McConfig {
                            paths: 200,
                            dt: 1.0 / 50.0,
                            seed: 7,
                            horizon: 10.0,
                            psd_floor: 0.0,
                        };
                        sample_states(&self.wishart, &cfg, 1).unwrap_or_default()
                    });
                    let max_value = states
                        .iter()
                        .map(|v| trace_of_product(&um, v))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if max_value < 0.0 {
                        DriftCheck::Sampled {
                            samples: states.len(),
                            max_value,
                        }
                    } else {
                        DriftCheck::Violated {
                            samples: states.len(),
                            max_value,
                        }
                    }
                };
                LegPositivity {
                    level_margin,
                    drift,
                }
            })
            .collect();
        PositivityReport { legs }
    }

    /// Instantaneous correlation of the normalised intensities `(1 + tr[u₀v])μᵢ`
    /// of legs 0 and 1 at state `v`.
    pub fn normalized_intensity_correlation(&self, v: &DMatrix<f64>) -> Result<f64> {
        if self.k() != 2 {
            return Err(Error::InvalidParameter {
                name: "legs",
                reason: "correlation is defined for two annuitants",
            });
        }
        let h1 = self.leg_coeffs(0)?.h;
        let h2 = self.leg_coeffs(1)?.h;
        let cov = quadratic_covariation(&self.wishart, &h1, &h2, v);
        let var1 = quadratic_covariation(&self.wishart, &h1, &h1, v);
        let var2 = quadratic_covariation(&self.wishart, &h2, &h2, v);
        if !(var1 > 0.0) || !(var2 > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        Ok(cov / libm::sqrt(var1 * var2))
    }

    /// Long-run mean state `lim E[v_s] = β ς_∞`.
    pub fn asymptotic_mean_state(&self) -> DMatrix<f64> {
        let n = self.wishart.n();
        let mut out = DMatrix::zeros(n, n);
        // the horizon is long enough for e^{ms} to vanish at double precision
        let horizon = 800.0 / spectral_abscissa_gap(self.wishart.m());
        for i in 0..n {
            for j in i..n {
                let mut u = DMatrix::zeros(n, n);
                u[(i, j)] = if i == j { 1.0 } else { 0.5 };
                u[(j, i)] = u[(i, j)];
                let b0 = trace_mean_coeffs(&self.wishart, &u, horizon).b0;
                out[(i, j)] = b0;
                out[(j, i)] = b0;
            }
        }
        out
    }

    /// Copy with `σ` replaced so the cross volatility vanishes while the
    /// per-component normalised quadratic variations are unchanged.
    pub fn independence_transform(&self) -> Result<Self> {
        if self.wishart.n() != 2 {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "independence transform is defined for n = 2",
            });
        }
        let s = self.wishart.sigma().as_matrix();
        let s12 = s[(0, 1)];
        let s11 = libm::sqrt(s[(0, 0)] * s[(0, 0)] + s12 * s12);
        let s22 = libm::sqrt(s[(1, 1)] * s[(1, 1)] + s12 * s12);
        let sigma = SpdMatrix::from_row_slice(2, &[s11, 0.0, 0.0, s22])?;
        let w = WishartParams::new(
            self.wishart.beta(),
            sigma,
            self.wishart.m().clone(),
            self.wishart.v0().clone(),
        )?;
        Ok(MortalityModel {
            positivity: PositivityReport { legs: Vec::new() },
            wishart: w,
            legs: self.legs.clone(),
            alpha: self.alpha,
            u0: self.u0.clone(),
        }
        .with_report())
    }

    fn with_report(mut self) -> Self {
        self.positivity = self.positivity_check();
        self
    }

    /// Distribution of `μᵢ(t + horizon)` given `v_t = state`.
    pub fn intensity_distribution(
        &self,
        leg: usize,
        horizon: f64,
        state: &SymMatrix,
    ) -> Result<RatioDistribution> {
        let coeffs = self.leg_coeffs(leg)?;
        let moments = ConditionalMoments::from_state(&self.wishart, horizon, state)?;
        RatioDistribution::new(coeffs.c, coeffs.h_sym(), self.u0.clone(), moments)
    }

    /// `P(μᵢ(T) ≤ z | v_t)`.
    pub fn intensity_cdf(
        &self,
        leg: usize,
        horizon: f64,
        z: f64,
        state: &SymMatrix,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        self.intensity_distribution(leg, horizon, state)?.cdf(z, cfg)
    }

    pub fn intensity_pdf(
        &self,
        leg: usize,
        horizon: f64,
        z: f64,
        state: &SymMatrix,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        self.intensity_distribution(leg, horizon, state)?.pdf(z, cfg)
    }

    pub fn intensity_moments(
        &self,
        leg: usize,
        horizon: f64,
        state: &SymMatrix,
        cfg: &QuadratureConfig,
    ) -> Result<RatioMoments> {
        self.intensity_distribution(leg, horizon, state)?.moments(cfg)
    }
}

fn spectral_abscissa_gap(m: &DMatrix<f64>) -> f64 {
    crate::numerics::general_eigenvalues(m)
        .map(|ev| ev.iter().map(|l| -l.re).fold(f64::INFINITY, f64::min))
        .unwrap_or(1.0)
        .max(1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioMoments {
    pub mean: f64,
    pub variance: f64,
    /// Upper end of the truncated support used for the moment integrals.
    pub support_max: f64,
}

/// Law of `(c + tr[h v_T]) / (1 + tr[u₀ v_T])` given the state at an earlier date,
/// recovered by Fourier inversion of the joint transform.
#[derive(Debug, Clone)]
pub struct RatioDistribution {
    c: f64,
    h: SymMatrix,
    u0: SymMatrix,
    moments: ConditionalMoments,
}

const TAIL_MASS: f64 = 1e-8;

impl RatioDistribution {
    pub fn new(c: f64, h: SymMatrix, u0: SymMatrix, moments: ConditionalMoments) -> Result<Self> {
        let n = moments.n();
        for found in [h.dim(), u0.dim()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        Ok(RatioDistribution { c, h, u0, moments })
    }

    pub fn conditional_moments(&self) -> &ConditionalMoments {
        &self.moments
    }

    fn direction(&self, z: f64) -> SymMatrix {
        self.h.add_scaled(&self.u0, -z)
    }

    /// `1/2 − (1/π) ∫₀^∞ Im(e^{is(c−z)} Φ(is(h − z u₀)) / s) ds`.
    pub fn cdf(&self, z: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let line = self.moments.line(&self.direction(z))?;
        let shift = self.c - z;
        let mut failure = None;
        let mut monitor = PhaseMonitor::default();
        let integral = integrate_semi_infinite(
            |s| {
                let w = Complex64::new(0.0, s);
                match line.value(w) {
                    Ok(phi) => {
                        if let Err(e) = monitor.observe_forward(s, phi.det_phase) {
                            failure.get_or_insert(e);
                        }
                        let v = Complex64::from_polar(1.0, s * shift) * phi.value / s;
                        Complex64::new(v.im, 0.0)
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            cfg,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(0.5 - integral.re / PI)
    }

    /// `−(1/π) ∫₀^∞ Im((−is + g) e^{is(c−z)} Φ(is(h − z u₀)) / s) ds` with
    /// `g = g₁ + g₂ + g₃` at `θ₁ = is·h`, `θ₂ = −is·u₀`, `ν = z`.
    pub fn pdf(&self, z: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let line = self.moments.line(&self.direction(z))?;
        let projected = line.project(self.u0.as_matrix());
        let shift = self.c - z;
        let mut failure = None;
        let mut monitor = PhaseMonitor::default();
        let integral = integrate_semi_infinite(
            |s| {
                let w = Complex64::new(0.0, s);
                match line.value_and_derivative(w, -w, &projected) {
                    Ok((phi, g)) => {
                        if let Err(e) = monitor.observe_forward(s, phi.det_phase) {
                            failure.get_or_insert(e);
                        }
                        let v = (g - w) * Complex64::from_polar(1.0, s * shift) * phi.value / s;
                        Complex64::new(v.im, 0.0)
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            cfg,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(-integral.re / PI)
    }

    /// Smallest `z_max` on the doubling ladder 0.1, 0.2, … whose upper tail mass is below 1e-8.
    pub fn support_max(&self, cfg: &QuadratureConfig) -> Result<f64> {
        let mut z_max = 0.1;
        loop {
            let tail = 1.0 - self.cdf(z_max, cfg)?;
            if tail < TAIL_MASS {
                return Ok(z_max);
            }
            z_max *= 2.0;
            if z_max > 1e6 {
                return Err(Error::NoConvergence("ratio support truncation"));
            }
        }
    }

    /// A point in `[0, upper]` below which the mass is under 1e-8, found by bisection.
    pub fn support_min(&self, upper: f64, cfg: &QuadratureConfig) -> Result<f64> {
        if self.cdf(0.0, cfg)? >= TAIL_MASS {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid, cfg)? < TAIL_MASS {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-4 * upper {
                break;
            }
        }
        Ok(lo)
    }

    /// `∫_a^b (1, z, z²)·pdf(z) dz` in one adaptive pass.
    ///
    /// The absolute tolerance is widened with the span because each density
    /// value is itself a quadrature result carrying noise near `cfg.abs_tol`.
    pub fn partial_moments(&self, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<[f64; 3]> {
        let fin = QuadratureConfig {
            abs_tol: 10.0 * cfg.abs_tol * (b - a).abs().max(1.0),
            rel_tol: cfg.rel_tol.max(1e-9),
            ..*cfg
        };
        let mut failure = None;
        let out = integrate_vec(
            |z| match self.pdf(z, cfg) {
                Ok(p) => [p, z * p, z * z * p],
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 3]
                }
            },
            a,
            b,
            &fin,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(out)
    }

    /// Mean and variance from the density over `[z_min, z_max]`: `z_max` doubles
    /// from 0.1 until the upper tail mass is below 1e-8, and `z_min` cuts off a
    /// lower tail of the same size.
    pub fn moments(&self, cfg: &QuadratureConfig) -> Result<RatioMoments> {
        let z_max = self.support_max(cfg)?;
        let z_min = self.support_min(z_max, cfg)?;
        let [_, m1, second] = self.partial_moments(z_min, z_max, cfg)?;
        Ok(RatioMoments {
            mean: m1,
            variance: second - m1 * m1,
            support_max: z_max,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::wishart::tests::reference;

    pub fn reference_model() -> MortalityModel {
        MortalityModel::new(
            reference(),
            alloc::vec![SymMatrix::unit_diagonal(2, 0), SymMatrix::unit_diagonal(2, 1)],
            0.04,
        )
        .unwrap()
    }

    #[test]
    fn state_price_density_values() {
        let mdl = reference_model();
        let v0 = mdl.wishart().v0().as_matrix().clone();
        assert!((mdl.state_price_density(0.0, &v0) - 1.0075).abs() < 1e-15);
        assert!(mdl.state_price_density(1.0, &v0) < mdl.state_price_density(0.5, &v0));
    }

    #[test]
    fn intensity_matches_scalar_formula() {
        let mdl = reference_model();
        let v = mdl.wishart().v0().as_matrix();
        let w = mdl.wishart().omega();
        let alpha = 0.04;
        let mu_x = (alpha / 2.0 + alpha * v[(0, 0)] - w[(0, 0)] + 2.0 * v[(0, 0)]) / (1.0 + v[(0, 0)] + v[(1, 1)]);
        let got = mdl.intensity(0, v).unwrap();
        assert!((got - mu_x).abs() < 1e-15);
        assert!(got > 0.0 && got < 0.2);
    }

    #[test]
    fn legs_add_up() {
        let mdl = reference_model();
        let v = DMatrix::from_row_slice(2, 2, &[0.011, 0.002, 0.002, 0.007]);
        let den = 1.0 + v[(0, 0)] + v[(1, 1)];
        let sum: f64 = (0..2).map(|i| mdl.intensity(i, &v).unwrap() * den).sum();
        let u0 = mdl.u0().as_matrix();
        let alpha = mdl.alpha();
        let expected = alpha + alpha * trace_of_product(u0, &v)
            - trace_of_product(u0, mdl.wishart().omega().as_matrix())
            - 2.0 * trace_of_product(&(u0 * mdl.wishart().m()), &v);
        assert!((sum - expected).abs() < 1e-15);
    }

    #[test]
    fn positivity_cases() {
        let mdl = reference_model();
        assert!(mdl.positivity().proved());
        let w = mdl.wishart().omega();
        assert!((mdl.positivity().legs[0].level_margin - (0.02 - w[(0, 0)])).abs() < 1e-16);

        let bad = MortalityModel::new_unchecked(reference(), mdl.legs().to_vec(), 0.0).unwrap();
        assert!(!bad.positivity().ok());
        assert!(MortalityModel::new(reference(), mdl.legs().to_vec(), 0.0).is_err());

        // a rotating m that defeats the symbolic test falls back to sampling
        let p = reference();
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 2.5, 0.0, -1.0]);
        let q = WishartParams::new(3.5, p.sigma().clone(), m, p.v0().clone()).unwrap();
        let sampled = MortalityModel::new_unchecked(q, mdl.legs().to_vec(), 0.04).unwrap();
        assert!(matches!(
            sampled.positivity().legs[0].drift,
            DriftCheck::Sampled { .. } | DriftCheck::Violated { .. }
        ));
    }

    #[test]
    fn correlations_at_start_and_long_run() {
        let mdl = reference_model();
        let c0 = mdl.normalized_intensity_correlation(mdl.wishart().v0().as_matrix()).unwrap();
        let v = mdl.wishart().v0().as_matrix();
        let s2 = mdl.wishart().sigma_sq();
        let closed = v[(0, 1)] * s2[(0, 1)] / libm::sqrt(v[(0, 0)] * v[(1, 1)] * s2[(0, 0)] * s2[(1, 1)]);
        assert!((c0 - closed).abs() < 1e-14);
        assert!((c0 - 0.40).abs() < 0.005);
        let c_inf = mdl.normalized_intensity_correlation(&mdl.asymptotic_mean_state()).unwrap();
        assert!((c_inf - 0.65).abs() < 0.005, "{c_inf}");

        let ind = mdl.independence_transform().unwrap();
        assert_eq!(ind.normalized_intensity_correlation(v).unwrap(), 0.0);
    }

    #[test]
    fn independence_transform_properties() {
        let mdl = reference_model();
        let ind = mdl.independence_transform().unwrap();
        let s = mdl.wishart().sigma();
        let s12 = s[(0, 1)];
        assert!((ind.wishart().sigma()[(0, 0)] - libm::sqrt(0.06 * 0.06 + s12 * s12)).abs() < 1e-16);
        assert_eq!(ind.wishart().sigma()[(0, 1)], 0.0);
        let twice = ind.independence_transform().unwrap();
        assert_eq!(twice.wishart(), ind.wishart());

        let v = mdl.wishart().v0().as_matrix();
        let e11 = SymMatrix::unit_diagonal(2, 0).into_inner();
        let e22 = SymMatrix::unit_diagonal(2, 1).into_inner();
        for e in [&e11, &e22] {
            let a = quadratic_covariation(mdl.wishart(), e, e, v);
            let b = quadratic_covariation(ind.wishart(), e, e, v);
            assert!((a - b).abs() < 1e-12 * a);
        }
        assert_eq!(quadratic_covariation(ind.wishart(), &e11, &e22, v), 0.0);
    }

    #[test]
    fn intensities_rise_with_own_state() {
        let mdl = reference_model();
        let v = mdl.wishart().v0().as_matrix().clone();
        let h = 1e-6;
        let slope = |leg: usize, i: usize| {
            let mut up = v.clone();
            up[(i, i)] += h;
            let mut dn = v.clone();
            dn[(i, i)] -= h;
            (mdl.intensity(leg, &up).unwrap() - mdl.intensity(leg, &dn).unwrap()) / (2.0 * h)
        };
        assert!(slope(0, 0) > 0.0);
        assert!(slope(1, 1) > 0.0);
        // through the shared denominator the other annuitant's state lowers the intensity
        let cross = slope(0, 1);
        let expected = -mdl.intensity(0, &v).unwrap() / (1.0 + v[(0, 0)] + v[(1, 1)]);
        assert!((cross - expected).abs() < 1e-6 * expected.abs());
    }

    #[test]
    fn cdf_limits_and_pdf_consistency() {
        let mdl = reference_model();
        let cfg = QuadratureConfig::default();
        let dist = mdl.intensity_distribution(0, 2.0, mdl.wishart().v0().as_sym()).unwrap();
        assert!(dist.cdf(-1.0, &cfg).unwrap().abs() < 1e-6);
        assert!((dist.cdf(1.0, &cfg).unwrap() - 1.0).abs() < 1e-6);
        let mut prev = -1.0;
        for k in 0..=20 {
            let z = 0.002 * k as f64;
            let c = dist.cdf(z, &cfg).unwrap();
            assert!(c >= prev - 1e-9);
            prev = c;
        }
        let h = 1e-5;
        for z in [0.008, 0.012, 0.016, 0.02, 0.025, 0.03] {
            let fd = (dist.cdf(z + h, &cfg).unwrap() - dist.cdf(z - h, &cfg).unwrap()) / (2.0 * h);
            let pdf = dist.pdf(z, &cfg).unwrap();
            assert!((pdf - fd).abs() < 1e-3 * pdf.abs().max(1.0), "z={z} pdf={pdf} fd={fd}");
        }
    }
}

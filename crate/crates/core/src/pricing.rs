//! Survival bonds, joint survival annuities, their distribution, and the
//! guaranteed annuity option priced by a damped Fourier integral.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mc::{simulate_range, McConfig, McEstimate, RationalIntegrand, Simulation};
use crate::mortality::{MortalityModel, RatioDistribution};
use crate::numerics::{
    integrate_semi_infinite, trace_of_product, PhaseMonitor, QuadratureConfig, SymMatrix,
};
use crate::wishart::{trace_mean_coeffs, ConditionalMoments, MgfLine};

/// Default damping for the option integral.
pub const DEFAULT_DAMPING: f64 = -0.025;

/// Flat deterministic short rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountCurve {
    rate: f64,
}

impl DiscountCurve {
    pub fn flat(rate: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "r",
                reason: "rate must be finite",
            });
        }
        Ok(DiscountCurve { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `P(t,T) = e^{−r(T−t)}`.
    pub fn discount(&self, t: f64, maturity: f64) -> f64 {
        libm::exp(-self.rate * (maturity - t))
    }
}

/// Option date `T` and the payment dates `T < T₁ < … < T_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnuitySchedule {
    option_date: f64,
    payment_dates: Vec<f64>,
}

impl AnnuitySchedule {
    pub fn new(option_date: f64, payment_dates: Vec<f64>) -> Result<Self> {
        let bad = |reason| {
            Err(Error::InvalidParameter {
                name: "schedule",
                reason,
            })
        };
        if !option_date.is_finite() || option_date < 0.0 {
            return bad("option date must be a non-negative time");
        }
        if payment_dates.is_empty() {
            return bad("at least one payment date is required");
        }
        if !(payment_dates[0] > option_date) {
            return bad("payments must start after the option date");
        }
        if payment_dates.windows(2).any(|w| !(w[1] > w[0])) || payment_dates.iter().any(|d| !d.is_finite()) {
            return bad("payment dates must be strictly increasing");
        }
        Ok(AnnuitySchedule {
            option_date,
            payment_dates,
        })
    }

    /// `payments` yearly dates `T+1, …, T+payments`.
    pub fn yearly(option_date: f64, payments: usize) -> Result<Self> {
        let dates = (1..=payments).map(|i| option_date + i as f64).collect();
        Self::new(option_date, dates)
    }

    pub fn option_date(&self) -> f64 {
        self.option_date
    }

    pub fn payment_dates(&self) -> &[f64] {
        &self.payment_dates
    }

    pub fn last_date(&self) -> f64 {
        *self.payment_dates.last().expect("non-empty schedule")
    }
}

/// Option to receive the annuity against a payment of `1/g`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaoContract {
    schedule: AnnuitySchedule,
    g: f64,
    damping: f64,
}

impl GaoContract {
    pub fn new(schedule: AnnuitySchedule, g: f64, damping: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: "guaranteed rate must be positive",
            });
        }
        if !(damping < 0.0) || !damping.is_finite() {
            return Err(Error::InvalidParameter {
                name: "z_i",
                reason: "damping must be strictly negative",
            });
        }
        Ok(GaoContract { schedule, g, damping })
    }

    pub fn schedule(&self) -> &AnnuitySchedule {
        &self.schedule
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(self.schedule.clone(), g, self.damping)
    }

    pub fn with_damping(&self, damping: f64) -> Result<Self> {
        Self::new(self.schedule.clone(), self.g, damping)
    }
}

/// Numerator of the annuity value at the option date: `b3 + tr[a3 v_T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnuityCoeffs {
    pub b3: f64,
    pub a3: SymMatrix,
}

/// `Y_T = b4 + tr[a4 v_T]`, with `a4` stored symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffCoeffs {
    pub b4: f64,
    pub a4: SymMatrix,
}

impl AnnuityCoeffs {
    /// `b4 = b3 − 1/g`, `a4 = a3 − u₀/g`.
    pub fn payoff(&self, u0: &SymMatrix, g: f64) -> PayoffCoeffs {
        PayoffCoeffs {
            b4: self.b3 - 1.0 / g,
            a4: self.a3.add_scaled(u0, -1.0 / g),
        }
    }
}

fn check_state(mdl: &MortalityModel, v: &DMatrix<f64>) -> Result<()> {
    let n = mdl.wishart().n();
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.nrows(),
        });
    }
    Ok(())
}

/// Joint survival bond `SB(t,T)` given `v_t`.
pub fn survival_bond(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    maturity: f64,
    v_t: &DMatrix<f64>,
) -> Result<f64> {
    if !(maturity >= t) {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: "maturity must not precede the valuation date",
        });
    }
    check_state(mdl, v_t)?;
    let tau = maturity - t;
    let u0 = mdl.u0().as_matrix();
    let tm = trace_mean_coeffs(mdl.wishart(), u0, tau);
    let num = 1.0 + tm.apply(v_t);
    let den = 1.0 + trace_of_product(u0, v_t);
    Ok(curve.discount(t, maturity) * libm::exp(-mdl.alpha() * tau) * num / den)
}

pub fn annuity_coeffs(mdl: &MortalityModel, curve: &DiscountCurve, schedule: &AnnuitySchedule) -> AnnuityCoeffs {
    let n = mdl.wishart().n();
    let u0 = mdl.u0().as_matrix();
    let big_t = schedule.option_date();
    let mut b3 = 0.0;
    let mut a3 = DMatrix::<f64>::zeros(n, n);
    for &ti in schedule.payment_dates() {
        let tau = ti - big_t;
        let w = curve.discount(big_t, ti) * libm::exp(-mdl.alpha() * tau);
        let tm = trace_mean_coeffs(mdl.wishart(), u0, tau);
        b3 += w * (1.0 + tm.b0);
        a3 += tm.a0 * w;
    }
    AnnuityCoeffs {
        b3,
        a3: SymMatrix::symmetrize(&a3),
    }
}

/// `Σ SB(T,Tᵢ) = (b3 + tr[a3 v_T]) / (1 + tr[u₀ v_T])`.
pub fn annuity_value(coeffs: &AnnuityCoeffs, mdl: &MortalityModel, v_t: &DMatrix<f64>) -> f64 {
    (coeffs.b3 + trace_of_product(coeffs.a3.as_matrix(), v_t)) / (1.0 + trace_of_product(mdl.u0().as_matrix(), v_t))
}

fn horizon(t: f64, schedule: &AnnuitySchedule) -> Result<f64> {
    let tau = schedule.option_date() - t;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: "option date must lie after the valuation date",
        });
    }
    Ok(tau)
}

/// Law at the option date of the annuity value, seen from `(t, v_t)`.
pub fn annuity_distribution(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    schedule: &AnnuitySchedule,
    v_t: &SymMatrix,
) -> Result<RatioDistribution> {
    let tau = horizon(t, schedule)?;
    let coeffs = annuity_coeffs(mdl, curve, schedule);
    let cm = ConditionalMoments::from_state(mdl.wishart(), tau, v_t)?;
    RatioDistribution::new(coeffs.b3, coeffs.a3, mdl.u0().clone(), cm)
}

pub fn annuity_cdf(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    schedule: &AnnuitySchedule,
    z: f64,
    v_t: &SymMatrix,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    annuity_distribution(mdl, curve, t, schedule, v_t)?.cdf(z, cfg)
}

pub fn annuity_pdf(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    schedule: &AnnuitySchedule,
    z: f64,
    v_t: &SymMatrix,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    annuity_distribution(mdl, curve, t, schedule, v_t)?.pdf(z, cfg)
}

/// Lower-tail risk measures of the annuity value: a low value is the adverse outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRisk {
    pub level: f64,
    /// `p`-quantile.
    pub var: f64,
    /// Mean of the annuity value below the quantile.
    pub es: f64,
}

pub fn annuity_var_es(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    schedule: &AnnuitySchedule,
    p: f64,
    v_t: &SymMatrix,
    cfg: &QuadratureConfig,
) -> Result<TailRisk> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "level must lie in (0,1)",
        });
    }
    let dist = annuity_distribution(mdl, curve, t, schedule, v_t)?;
    let big_t = schedule.option_date();
    let cap: f64 = schedule.payment_dates().iter().map(|&d| curve.discount(big_t, d)).sum();
    let mut lo = 0.0;
    let mut hi = cap + 1.0;
    let (f_lo, f_hi) = (dist.cdf(lo, cfg)?, dist.cdf(hi, cfg)?);
    if !(f_lo < p && f_hi > p) {
        return Err(Error::BracketFailure);
    }
    let mut iterations = 0;
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid, cfg)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::NoConvergence("quantile bisection"));
        }
    }
    let var = 0.5 * (lo + hi);
    let start = dist.support_min(var, cfg)?;
    let [_, tail_mean, _] = dist.partial_moments(start, var, cfg)?;
    Ok(TailRisk {
        level: p,
        var,
        es: tail_mean / p,
    })
}

/// `E[(Y)₊] = (1/π) ∫₀^∞ Re(Φ_Y(z + i z_i) / (i(z + i z_i))²) dz` for a damping `z_i < 0`.
///
/// `cf` returns the characteristic function and the determinant phase (used
/// for the branch monitor; pass 0 when there is none).
pub fn expected_positive_part<F>(mut cf: F, damping: f64, cfg: &QuadratureConfig) -> Result<DampedIntegral>
where
    F: FnMut(Complex64) -> Result<(Complex64, f64)>,
{
    if !(damping < 0.0) {
        return Err(Error::InvalidParameter {
            name: "z_i",
            reason: "damping must be strictly negative",
        });
    }
    let mut failure = None;
    let mut monitor = PhaseMonitor::default();
    let integral = integrate_semi_infinite(
        |z| {
            let w = Complex64::new(z, damping);
            match cf(w) {
                Ok((phi, phase)) => {
                    if let Err(e) = monitor.observe_forward(z, phase) {
                        failure.get_or_insert(e);
                    }
                    let iw = Complex64::new(0.0, 1.0) * w;
                    Complex64::new((phi / (iw * iw)).re, 0.0)
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
    Ok(DampedIntegral {
        value: integral.re / PI,
        worst_phase_jump: monitor.worst_jump(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedIntegral {
    pub value: f64,
    /// Largest step of the determinant phase between successive nodes.
    pub worst_phase_jump: f64,
}

/// Characteristic function of `Y_T = b4 + tr[a4 v_T]` given `v_t`.
#[derive(Debug, Clone)]
pub struct PayoffTransform {
    b4: f64,
    line: MgfLine,
}

impl PayoffTransform {
    pub fn new(payoff: &PayoffCoeffs, cm: &ConditionalMoments) -> Result<Self> {
        Ok(PayoffTransform {
            b4: payoff.b4,
            line: cm.line(&payoff.a4)?,
        })
    }

    /// `Φ_Y(w) = e^{iwb4} Φ(iw·a4)` together with the determinant phase.
    pub fn cf(&self, w: Complex64) -> Result<(Complex64, f64)> {
        let iw = Complex64::new(0.0, 1.0) * w;
        let point = self.line.value(iw)?;
        Ok(((iw * self.b4).exp() * point.value, point.det_phase))
    }

    /// Largest `|z_i|` for which `E[e^{|z_i| Y}]` is finite.
    pub fn call_damping_bound(&self) -> f64 {
        self.line.domain_bound()
    }

    /// Largest `|z_i|` for which `E[e^{−|z_i| Y}]` is finite.
    pub fn put_damping_bound(&self) -> f64 {
        let lmin = self.line.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if lmin >= 0.0 {
            f64::INFINITY
        } else {
            -0.5 / lmin
        }
    }

    fn check(damping: f64, bound: f64) -> Result<()> {
        if !(damping < 0.0) {
            return Err(Error::InvalidParameter {
                name: "z_i",
                reason: "damping must be strictly negative",
            });
        }
        if -damping >= bound {
            return Err(Error::DampingOutOfDomain { damping, bound });
        }
        Ok(())
    }

    /// `E[(Y)₊]`.
    pub fn call(&self, damping: f64, cfg: &QuadratureConfig) -> Result<DampedIntegral> {
        Self::check(damping, self.call_damping_bound())?;
        expected_positive_part(|w| self.cf(w), damping, cfg)
    }

    /// `E[(−Y)₊]`, from `Φ_{−Y}(w) = Φ_Y(−w)`.
    pub fn put(&self, damping: f64, cfg: &QuadratureConfig) -> Result<DampedIntegral> {
        Self::check(damping, self.put_damping_bound())?;
        expected_positive_part(|w| self.cf(-w), damping, cfg)
    }
}

/// `P(t,T) e^{−α(T−t)} / (1 + tr[u₀ v_t])`.
pub fn deflator(mdl: &MortalityModel, curve: &DiscountCurve, t: f64, maturity: f64, v_t: &DMatrix<f64>) -> f64 {
    curve.discount(t, maturity) * libm::exp(-mdl.alpha() * (maturity - t))
        / (1.0 + trace_of_product(mdl.u0().as_matrix(), v_t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaoPrice {
    pub price: f64,
    /// `E_t[(Y_T)₊]` before deflation.
    pub expectation: f64,
    pub deflator: f64,
    pub worst_phase_jump: f64,
}

/// Payoff coefficients and conditional transform for a contract seen from `(t, v_t)`.
pub fn gao_setup(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    contract: &GaoContract,
    v_t: &SymMatrix,
) -> Result<(PayoffCoeffs, ConditionalMoments)> {
    let tau = horizon(t, contract.schedule())?;
    let coeffs = annuity_coeffs(mdl, curve, contract.schedule());
    let payoff = coeffs.payoff(mdl.u0(), contract.g());
    let cm = ConditionalMoments::from_state(mdl.wishart(), tau, v_t)?;
    Ok((payoff, cm))
}

/// Option value by the damped Fourier integral of the payoff transform.
pub fn gao_price_cf(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    contract: &GaoContract,
    v_t: &SymMatrix,
    cfg: &QuadratureConfig,
) -> Result<GaoPrice> {
    let (payoff, cm) = gao_setup(mdl, curve, t, contract, v_t)?;
    let transform = PayoffTransform::new(&payoff, &cm)?;
    let out = transform.call(contract.damping(), cfg)?;
    let d = deflator(mdl, curve, t, contract.schedule().option_date(), v_t.as_matrix());
    Ok(GaoPrice {
        price: d * out.value,
        expectation: out.value,
        deflator: d,
        worst_phase_jump: out.worst_phase_jump,
    })
}

/// Deflated forward annuity `P e^{−α(T−t)} (b3 + tr[a3 E_t v_T]) / (1 + tr[u₀ v_t])`,
/// the option value in the limit `1/g → 0`.
pub fn forward_annuity(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    t: f64,
    schedule: &AnnuitySchedule,
    v_t: &SymMatrix,
) -> Result<f64> {
    let tau = horizon(t, schedule)?;
    let coeffs = annuity_coeffs(mdl, curve, schedule);
    let mean = mdl.wishart().conditional_mean(tau, v_t);
    let d = deflator(mdl, curve, t, schedule.option_date(), v_t.as_matrix());
    Ok(d * (coeffs.b3 + trace_of_product(coeffs.a3.as_matrix(), mean.as_matrix())))
}

/// Pathwise option values `deflator·(b4 + tr[a4 v_T])₊` over simulated terminal states
/// started at the model's initial state at time 0.
pub fn mc_gao_samples(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    contract: &GaoContract,
    sim: &Simulation,
) -> Result<Vec<f64>> {
    let v0 = mdl.wishart().v0().as_matrix();
    let payoff = annuity_coeffs(mdl, curve, contract.schedule()).payoff(mdl.u0(), contract.g());
    let d = deflator(mdl, curve, 0.0, contract.schedule().option_date(), v0);
    let a4 = payoff.a4.as_matrix().as_slice();
    if sim.n() != mdl.wishart().n() {
        return Err(Error::DimensionMismatch {
            expected: mdl.wishart().n(),
            found: sim.n(),
        });
    }
    // a4 is symmetric so tr[a4 v] is the elementwise dot product
    Ok(sim.map_terminals(|v| {
        let y = payoff.b4 + a4.iter().zip(v).map(|(a, x)| a * x).sum::<f64>();
        d * y.max(0.0)
    }))
}

/// Monte Carlo option value at time 0 from `v₀`, simulated to the option date.
pub fn mc_gao_price(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    contract: &GaoContract,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let cfg = McConfig {
        horizon: contract.schedule().option_date(),
        ..*cfg
    };
    let sim = simulate_range(mdl.wishart(), &cfg, 0..cfg.paths, None)?;
    Ok(McEstimate::from_samples(&mc_gao_samples(mdl, curve, contract, &sim)?))
}

/// `Σᵢ μᵢ(v)` written as one rational integrand.
pub fn total_intensity(mdl: &MortalityModel) -> Result<RationalIntegrand> {
    let n = mdl.wishart().n();
    let mut c = 0.0;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..mdl.k() {
        let leg = mdl.leg_coeffs(i)?;
        c += leg.c;
        h += leg.h_sym().as_matrix();
    }
    Ok(RationalIntegrand {
        c,
        h,
        d: 1.0,
        u: mdl.u0().as_matrix().clone(),
    })
}

/// Survival bond from `v₀` by simulating `E[e^{−∫₀^T Σμᵢ ds}]` with the trapezoid rule
/// along each path, discounted at the flat rate.
pub fn mc_survival_bond(
    mdl: &MortalityModel,
    curve: &DiscountCurve,
    maturity: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let cfg = McConfig {
        horizon: maturity,
        ..*cfg
    };
    let integrand = total_intensity(mdl)?;
    let sim = simulate_range(mdl.wishart(), &cfg, 0..cfg.paths, Some(&integrand))?;
    let p = curve.discount(0.0, maturity);
    let samples: Vec<f64> = sim.integrals().iter().map(|&i| p * libm::exp(-i)).collect();
    Ok(McEstimate::from_samples(&samples))
}

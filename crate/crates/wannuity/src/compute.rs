//! Grid and pricing computations behind the subcommands. Grid points and Monte
//! Carlo chunks run on the rayon pool; results come back in grid order.

use std::fmt;
use std::str::FromStr;

use lrwm_core::approximations::{
    cumulants, eigen_sign, gamma_price, gaussian_expectation_positive, single_eig_price, spectral_price,
    spectral_surrogate,
};
use lrwm_core::mc::{simulate_range, McConfig, McEstimate, Simulation};
use lrwm_core::mortality::RatioMoments;
use lrwm_core::pricing::{
    annuity_coeffs, annuity_distribution, annuity_value, annuity_var_es, deflator, forward_annuity, gao_price_cf,
    gao_setup, mc_gao_samples, survival_bond, GaoContract, PayoffTransform, TailRisk,
};
use lrwm_core::wishart::WishartParams;
use lrwm_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ModelConfig, Setup, SweepParam};

/// `lo:hi:steps`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self, String> {
        if !(lo.is_finite() && hi.is_finite()) || steps == 0 || (steps > 1 && !(hi > lo)) {
            return Err(format!("invalid grid {lo}:{hi}:{steps}"));
        }
        Ok(Grid { lo, hi, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.hi } else { self.lo + h * i as f64 })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:steps, got `{s}`"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
        let steps = parts[2].trim().parse::<usize>().map_err(|e| format!("`{}`: {e}", parts[2]))?;
        Grid::new(num(parts[0])?, num(parts[1])?, steps)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.steps)
    }
}

/// Failure of a command after the configuration was accepted.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(Error),
    Usage(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Numerical(e) => write!(f, "numerical error {}: {e}", e.name()),
            RunError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

pub type RunResult<T> = Result<T, RunError>;

const CHUNK: usize = 5_000;

/// Simulates `cfg.paths` paths in fixed-size chunks on the thread pool; the
/// result does not depend on the number of workers.
pub fn simulate_parallel(p: &WishartParams, cfg: &McConfig) -> Result<Simulation, Error> {
    cfg.validate()?;
    let chunks: Vec<_> = (0..cfg.paths.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(cfg.paths))
        .collect();
    let sims = chunks
        .into_par_iter()
        .map(|r| simulate_range(p, cfg, r, None))
        .collect::<Result<Vec<_>, _>>()?;
    Simulation::concat(sims)
}

/// Monte Carlo option value from `v₀` at time 0.
pub fn mc_gao(setup: &Setup, contract: &GaoContract, mc: &McConfig) -> Result<McEstimate, Error> {
    let cfg = McConfig {
        horizon: contract.schedule().option_date(),
        ..*mc
    };
    let sim = simulate_parallel(setup.model.wishart(), &cfg)?;
    Ok(McEstimate::from_samples(&mc_gao_samples(&setup.model, &setup.curve, contract, &sim)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cf,
    Gaussian,
    Spectral,
    SingleEig,
    Gamma,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceReport {
    pub method: Method,
    pub g: f64,
    pub value: f64,
    /// Undeflated `E[(Y_T)₊]`.
    pub expectation: f64,
    pub deflator: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Option value at time 0 from `v₀` with the chosen method.
pub fn price_gao(setup: &Setup, contract: &GaoContract, method: Method) -> RunResult<PriceReport> {
    let mdl = &setup.model;
    let v0 = setup.v0();
    let t_opt = contract.schedule().option_date();
    let d = deflator(mdl, &setup.curve, 0.0, t_opt, v0.as_matrix());
    let mut warnings = Vec::new();
    let (expectation, std_error, paths) = match method {
        Method::Cf => {
            let p = gao_price_cf(mdl, &setup.curve, 0.0, contract, &v0, &setup.quad)?;
            (p.expectation, None, None)
        }
        Method::Mc => {
            let est = mc_gao(setup, contract, &setup.mc)?;
            (est.value / d, Some(est.std_error), Some(est.paths_used))
        }
        _ => {
            let (payoff, cm) = gao_setup(mdl, &setup.curve, 0.0, contract, &v0)?;
            match method {
                Method::Gaussian => {
                    let k = cumulants(&cm, &payoff, 3);
                    (gaussian_expectation_positive(k.kappa(1), k.kappa(2), k.kappa(3))?, None, None)
                }
                Method::Spectral => {
                    let s = spectral_surrogate(&cm, &payoff);
                    if s.any_clamped() {
                        warnings.push("negative noncentrality clamped to zero".to_string());
                    }
                    (spectral_price(&s, contract.damping(), &setup.quad)?, None, None)
                }
                Method::SingleEig => {
                    let s = spectral_surrogate(&cm, &payoff);
                    let p = single_eig_price(&s, &setup.quad)?;
                    if !p.dominant() {
                        warnings.push(format!(
                            "no dominant eigenvalue (ratio {:.3} > 0.5)",
                            p.dominance_ratio
                        ));
                    }
                    (p.value, None, None)
                }
                Method::Gamma => {
                    let sign = eigen_sign(&payoff.a4)?;
                    let k = cumulants(&cm, &payoff, 3);
                    (gamma_price(&k.moments(), sign, payoff.b4)?.value, None, None)
                }
                Method::Cf | Method::Mc => unreachable!(),
            }
        }
    };
    Ok(PriceReport {
        method,
        g: contract.g(),
        value: d * expectation,
        expectation,
        deflator: d,
        std_error,
        paths,
        warnings,
    })
}

/// Survival bond `SB(t, T)` with `v_t = v₀`.
pub fn price_bond(setup: &Setup, t: f64, maturity: f64) -> RunResult<f64> {
    Ok(survival_bond(&setup.model, &setup.curve, t, maturity, setup.v0().as_matrix())?)
}

/// Annuity value at time `t` with `v_t = v₀`: the spot annuity when `t` is the
/// option date, the deferred annuity otherwise.
pub fn price_annuity(setup: &Setup, t: f64) -> RunResult<f64> {
    let sched = setup.contract.schedule();
    if t == sched.option_date() {
        let coeffs = annuity_coeffs(&setup.model, &setup.curve, sched);
        Ok(annuity_value(&coeffs, &setup.model, setup.v0().as_matrix()))
    } else {
        Ok(forward_annuity(&setup.model, &setup.curve, t, sched, &setup.v0())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxRow {
    pub g: f64,
    pub cf: f64,
    pub gaussian: f64,
    pub spectral: f64,
    pub gamma: f64,
    pub abs_pct_err_gaussian: f64,
    pub abs_pct_err_spectral: f64,
    pub abs_pct_err_gamma: f64,
}

fn abs_pct(x: f64, reference: f64) -> f64 {
    ((x - reference) / reference).abs() * 100.0
}

/// Exact and approximate option values over a strike grid.
pub fn compare_approx(setup: &Setup, g_grid: &Grid) -> RunResult<Vec<ApproxRow>> {
    g_grid
        .points()
        .into_par_iter()
        .map(|g| {
            let c = setup.contract.with_g(g)?;
            let price = |m| price_gao(setup, &c, m).map(|r| r.value);
            let cf = price(Method::Cf)?;
            let gaussian = price(Method::Gaussian)?;
            let spectral = price(Method::Spectral)?;
            let gamma = price(Method::Gamma)?;
            Ok(ApproxRow {
                g,
                cf,
                gaussian,
                spectral,
                gamma,
                abs_pct_err_gaussian: abs_pct(gaussian, cf),
                abs_pct_err_spectral: abs_pct(spectral, cf),
                abs_pct_err_gamma: abs_pct(gamma, cf),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndependenceRow {
    pub g: f64,
    pub price_dependent: f64,
    pub price_independent: f64,
    pub abs_pct_gap: f64,
}

/// Option values with and without the cross volatility of the two lives.
pub fn independence(setup: &Setup, g_grid: &Grid) -> RunResult<Vec<IndependenceRow>> {
    let ind = Setup {
        model: setup.model.independence_transform()?,
        ..setup.clone()
    };
    g_grid
        .points()
        .into_par_iter()
        .map(|g| {
            let c = setup.contract.with_g(g)?;
            let dep = price_gao(setup, &c, Method::Cf)?.value;
            let indep = price_gao(&ind, &c, Method::Cf)?.value;
            Ok(IndependenceRow {
                g,
                price_dependent: dep,
                price_independent: indep,
                abs_pct_gap: abs_pct(indep, dep),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub param_value: f64,
    pub gao_price: f64,
}

/// Exact option value as one parameter moves over a grid.
pub fn sensitivity(cfg: &ModelConfig, param: SweepParam, range: &Grid) -> RunResult<Vec<SensitivityRow>> {
    // reject an unusable base point before sweeping
    cfg.setup()?;
    range
        .points()
        .into_par_iter()
        .map(|x| {
            let s = cfg.with_param(param, x)?.setup()?;
            Ok(SensitivityRow {
                param_value: x,
                gao_price: price_gao(&s, &s.contract, Method::Cf)?.value,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistRow {
    pub z: f64,
    pub cdf: f64,
    pub pdf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityDist {
    pub rows: Vec<DistRow>,
    pub moments: RatioMoments,
}

/// CDF and density of leg `leg`'s intensity `horizon` years ahead of `v₀`.
pub fn dist_intensity(setup: &Setup, leg: usize, horizon: f64, grid: &Grid) -> RunResult<IntensityDist> {
    let d = setup.model.intensity_distribution(leg, horizon, &setup.v0())?;
    let rows = grid
        .points()
        .into_par_iter()
        .map(|z| {
            Ok(DistRow {
                z,
                cdf: d.cdf(z, &setup.quad)?,
                pdf: d.pdf(z, &setup.quad)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(IntensityDist {
        rows,
        moments: d.moments(&setup.density_quad())?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnuityDist {
    pub rows: Vec<DistRow>,
    pub tail: TailRisk,
}

/// CDF and density of the annuity value at the option date, seen from `v₀`.
pub fn dist_annuity(setup: &Setup, grid: &Grid, p: f64) -> RunResult<AnnuityDist> {
    let sched = setup.contract.schedule();
    let v0 = setup.v0();
    let d = annuity_distribution(&setup.model, &setup.curve, 0.0, sched, &v0)?;
    let rows = grid
        .points()
        .into_par_iter()
        .map(|z| {
            Ok(DistRow {
                z,
                cdf: d.cdf(z, &setup.quad)?,
                pdf: d.pdf(z, &setup.quad)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let tail = annuity_var_es(&setup.model, &setup.curve, 0.0, sched, p, &v0, &setup.density_quad())?;
    Ok(AnnuityDist { rows, tail })
}

/// Exact put-call parity residual `|call − put − E[Y]| / |E[Y]|` at the contract damping.
pub fn parity_residual(setup: &Setup, contract: &GaoContract) -> RunResult<f64> {
    let (payoff, cm) = gao_setup(&setup.model, &setup.curve, 0.0, contract, &setup.v0())?;
    let tr = PayoffTransform::new(&payoff, &cm)?;
    let call = tr.call(contract.damping(), &setup.quad)?.value;
    let put = tr.put(contract.damping(), &setup.quad)?.value;
    let mean = cumulants(&cm, &payoff, 1).kappa(1);
    Ok(((call - put - mean) / mean).abs())
}

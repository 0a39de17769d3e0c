//! Self-check suite: closed forms against Monte Carlo and finite differences,
//! distribution sanity, parity and damping invariance.

use lrwm_core::approximations::{cumulants, cumulants_from_moments};
use lrwm_core::mc::{McConfig, McEstimate, Simulation};
use lrwm_core::mortality::RatioDistribution;
use lrwm_core::numerics::{complexify, QuadratureConfig, SymMatrix};
use lrwm_core::pricing::{annuity_distribution, gao_setup, PayoffCoeffs, PayoffTransform};
use lrwm_core::wishart::ConditionalMoments;
use lrwm_core::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::compute::{parity_residual, simulate_parallel, RunResult};
use crate::config::Setup;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub tolerance: String,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, tolerance: &str, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            tolerance: tolerance.to_string(),
            detail,
        }
    }
}

pub const DAMPINGS: [f64; 3] = [-0.01, -0.025, -0.05];
const BATCHES: usize = 50;

/// Terminal states at the option date, simulated from `v₀` with `mc`.
pub fn option_date_simulation(setup: &Setup, mc: &McConfig) -> Result<Simulation, Error> {
    let cfg = McConfig {
        horizon: setup.contract.schedule().option_date(),
        ..*mc
    };
    simulate_parallel(setup.model.wishart(), &cfg)
}

fn sym(n: usize, f: impl Fn(usize, usize) -> f64) -> SymMatrix {
    SymMatrix::symmetrize(&DMatrix::from_fn(n, n, f))
}

/// Real arguments for the transform checks, each with `2θ` inside the domain
/// so the Monte Carlo estimator has finite variance.
fn mgf_points(cm: &ConditionalMoments) -> RunResult<Vec<SymMatrix>> {
    let n = cm.n();
    let candidates = [
        sym(n, |i, j| if i == j { -0.5 } else { 0.0 }),
        sym(n, |i, j| if i == j { -2.0 / (i + 1) as f64 } else { 0.5 }),
        sym(n, |i, j| if i == j { 3.0 - i as f64 } else { 0.0 }),
        sym(n, |i, j| if i == j { 0.0 } else { 5.0 }),
        sym(n, |i, j| if i == j { -10.0 } else { 1.0 }),
    ];
    let mut out = Vec::new();
    for mut theta in candidates {
        let bound = cm.mgf_domain_bound(&theta)?;
        if bound <= 2.0 {
            theta = theta.scale(bound / 2.5);
        }
        out.push(theta);
    }
    Ok(out)
}

fn dot(a: &SymMatrix, v: &[f64]) -> f64 {
    a.as_matrix().as_slice().iter().zip(v).map(|(x, y)| x * y).sum()
}

fn mgf_vs_mc(cm: &ConditionalMoments, sim: &Simulation) -> RunResult<Check> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for theta in mgf_points(cm)? {
        let exact = cm.mgf_real(&theta)?;
        let est = McEstimate::from_samples(&sim.map_terminals(|v| dot(&theta, v).exp()));
        let z = (est.value - exact).abs() / est.std_error;
        worst = worst.max(z);
        ok &= est.contains(exact, 3.0);
    }
    Ok(Check::new(
        "mgf_vs_mc",
        ok,
        "3 SE at 5 points",
        format!("worst deviation {worst:.2} SE over {} paths", sim.paths()),
    ))
}

fn derivative_vs_fd(cm: &ConditionalMoments) -> RunResult<Check> {
    let n = cm.n();
    let i = Complex64::new(0.0, 1.0);
    let h1 = complexify(sym(n, |a, b| if a == b { 0.08 / (a + 1) as f64 } else { 0.01 }).as_matrix());
    let dir = complexify(&DMatrix::identity(n, n));
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let s = -3.0 + 0.4 * k as f64;
        let t1 = &h1 * (i * s);
        let t2 = &dir * (-i * s);
        let nu = Complex64::new(0.1 + 0.04 * k as f64, 0.0);
        let d = cm.mgf_derivative(&t1, &t2, nu)?;
        let h = 1e-5;
        let at = |x: Complex64| cm.mgf(&(&t1 + &t2 * x)).map(|p| p.value);
        let fd = (at(nu + h)? * 8.0 - at(nu - h)? * 8.0 - at(nu + 2.0 * h)? + at(nu - 2.0 * h)?) / (12.0 * h);
        worst = worst.max((d.value - fd).norm() / fd.norm().max(1e-300));
    }
    Ok(Check::new(
        "mgf_derivative_vs_fd",
        worst < 1e-5,
        "rel 1e-5 at 20 points",
        format!("worst relative error {worst:.2e}"),
    ))
}

/// `κ₁..κ₃` from derivatives of `log E[e^{xY}]` at 0 by sixth-order central differences.
pub fn cumulants_by_fd(tr: &PayoffTransform, scale: f64) -> RunResult<[f64; 3]> {
    let kgf = |x: f64| -> Result<f64, Error> { Ok(tr.cf(Complex64::new(0.0, -x))?.0.ln().re) };
    let h = scale;
    let f: Vec<f64> = (-4..=4).map(|j| kgf(j as f64 * h)).collect::<Result<_, _>>()?;
    let at = |j: i32| f[(j + 4) as usize];
    let d1 = (-at(3) + 9.0 * at(2) - 45.0 * at(1) + 45.0 * at(-1) - 9.0 * at(-2) + at(-3)) / (-60.0 * h);
    let d2 = (2.0 * at(3) - 27.0 * at(2) + 270.0 * at(1) - 490.0 * at(0) + 270.0 * at(-1) - 27.0 * at(-2)
        + 2.0 * at(-3))
        / (180.0 * h * h);
    let d3 = (-7.0 * at(4) + 72.0 * at(3) - 338.0 * at(2) + 488.0 * at(1) - 488.0 * at(-1) + 338.0 * at(-2)
        - 72.0 * at(-3)
        + 7.0 * at(-4))
        / (-240.0 * h * h * h);
    Ok([d1, d2, d3])
}

fn sample_cumulants(ys: &[f64]) -> [f64; 3] {
    let n = ys.len() as f64;
    let m: Vec<f64> = (1..=3).map(|p| ys.iter().map(|y| y.powi(p)).sum::<f64>() / n).collect();
    let k = cumulants_from_moments(&m);
    [k[0], k[1], k[2]]
}

fn cumulant_checks(payoff: &PayoffCoeffs, cm: &ConditionalMoments, sim: &Simulation) -> RunResult<Vec<Check>> {
    let exact = cumulants(cm, payoff, 3);
    let tr = PayoffTransform::new(payoff, cm)?;
    let scale = 0.5 / exact.kappa(2).sqrt();
    let fd = cumulants_by_fd(&tr, scale * 0.05)?;
    let fd_err = (0..3)
        .map(|j| ((fd[j] - exact.kappa(j + 1)) / exact.kappa(j + 1)).abs())
        .fold(0.0, f64::max);

    // centre the samples on the exact mean to keep the power sums well conditioned
    let shift = exact.kappa(1);
    let ys = sim.map_terminals(|v| payoff.b4 + dot(&payoff.a4, v) - shift);
    let whole = sample_cumulants(&ys);
    let size = ys.len() / BATCHES;
    let batches: Vec<[f64; 3]> = (0..BATCHES).map(|b| sample_cumulants(&ys[b * size..(b + 1) * size])).collect();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for j in 0..3 {
        let mean = batches.iter().map(|k| k[j]).sum::<f64>() / BATCHES as f64;
        let var = batches.iter().map(|k| (k[j] - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
        let se = (var / BATCHES as f64).sqrt();
        let target = exact.kappa(j + 1) - if j == 0 { shift } else { 0.0 };
        let z = (whole[j] - target).abs() / se;
        worst = worst.max(z);
        ok &= z <= 3.0;
    }
    Ok(vec![
        Check::new(
            "cumulants_vs_fd",
            fd_err < 1e-4,
            "rel 1e-4",
            format!("worst relative error {fd_err:.2e}"),
        ),
        Check::new(
            "cumulants_vs_mc",
            ok,
            "3 SE (batch means)",
            format!("worst deviation {worst:.2} SE"),
        ),
    ])
}

/// Largest CDF decrease tolerated between grid points. In the flat tails the
/// true increments are far below double precision, so the comparison needs a
/// floor; the worst decrease found is reported either way.
pub const CDF_NOISE_FLOOR: f64 = 1e-10;

/// Monotone CDF on a grid over the support, CDF limits, and unit density mass.
fn distribution_check(name: &str, d: &RatioDistribution, setup: &Setup) -> RunResult<Check> {
    let cfg = &setup.quad;
    let tight = QuadratureConfig {
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        ..*cfg
    };
    let loose = setup.density_quad();
    let top = d.support_max(cfg)?;
    let grid: Vec<f64> = (0..=60).map(|i| top * i as f64 / 60.0).collect();
    let cdf: Vec<f64> = grid.iter().map(|&z| d.cdf(z, &tight)).collect::<Result<_, _>>()?;
    let worst_drop = cdf.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let lo = cdf[0].abs();
    let hi = (1.0 - cdf[cdf.len() - 1]).abs();
    let start = d.support_min(top, cfg)?;
    let mass = d.partial_moments(start, top, &loose)?[0];
    Ok(Check::new(
        name,
        worst_drop <= CDF_NOISE_FLOOR && lo < 1e-6 && hi < 1e-6 && (mass - 1.0).abs() < 1e-4,
        "monotone (noise floor 1e-10); limits 1e-6; mass 1e-4",
        format!(
            "largest decrease {worst_drop:.1e} F(0)={lo:.1e} 1-F({top})={hi:.1e} mass-1={:.1e}",
            mass - 1.0
        ),
    ))
}

/// Runs every check; `sim` holds terminal states at the option date from `v₀`.
pub fn run_suite(setup: &Setup, sim: &Simulation) -> RunResult<Vec<Check>> {
    let v0 = setup.v0();
    let c = &setup.contract;
    let (payoff, cm) = gao_setup(&setup.model, &setup.curve, 0.0, c, &v0)?;
    let mut checks = vec![mgf_vs_mc(&cm, sim)?, derivative_vs_fd(&cm)?];
    checks.extend(cumulant_checks(&payoff, &cm, sim)?);

    let horizon = c.schedule().option_date();
    for leg in 0..setup.model.k() {
        let d = setup.model.intensity_distribution(leg, horizon, &v0)?;
        checks.push(distribution_check(&format!("intensity_distribution_leg{leg}"), &d, setup)?);
    }
    let d = annuity_distribution(&setup.model, &setup.curve, 0.0, c.schedule(), &v0)?;
    checks.push(distribution_check("annuity_distribution", &d, setup)?);

    let parity = parity_residual(setup, c)?;
    checks.push(Check::new(
        "put_call_parity",
        parity < 1e-6,
        "rel 1e-6",
        format!("residual {parity:.2e} at z_i={}", c.damping()),
    ));

    let tr = PayoffTransform::new(&payoff, &cm)?;
    let base = tr.call(c.damping(), &setup.quad)?;
    let mut spread: f64 = 0.0;
    let mut worst_jump = base.worst_phase_jump;
    for z in DAMPINGS {
        let p = tr.call(z, &setup.quad)?;
        spread = spread.max(((p.value - base.value) / base.value).abs());
        worst_jump = worst_jump.max(p.worst_phase_jump);
    }
    let put = tr.put(c.damping(), &setup.quad)?;
    worst_jump = worst_jump.max(put.worst_phase_jump);
    checks.push(Check::new(
        "damping_invariance",
        spread < 1e-6,
        "rel 1e-6 over z_i in {-0.01,-0.025,-0.05}",
        format!("max relative spread {spread:.2e}"),
    ));
    // any jump beyond the monitor threshold aborts the integral with BranchJump
    checks.push(Check::new(
        "phase_monitor",
        true,
        "no branch jumps",
        format!("largest phase step {worst_jump:.3} rad"),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::reference;

    #[test]
    fn finite_difference_cumulants_are_accurate() {
        let s = reference().setup().unwrap();
        let (payoff, cm) = gao_setup(&s.model, &s.curve, 0.0, &s.contract, &s.v0()).unwrap();
        let exact = cumulants(&cm, &payoff, 3);
        let tr = PayoffTransform::new(&payoff, &cm).unwrap();
        let fd = cumulants_by_fd(&tr, 0.025 / exact.kappa(2).sqrt()).unwrap();
        for j in 0..3 {
            let rel = ((fd[j] - exact.kappa(j + 1)) / exact.kappa(j + 1)).abs();
            assert!(rel < 1e-4, "{j}: {} {}", fd[j], exact.kappa(j + 1));
        }
    }

    #[test]
    fn derivative_check_passes() {
        let s = reference().setup().unwrap();
        let (_, cm) = gao_setup(&s.model, &s.curve, 0.0, &s.contract, &s.v0()).unwrap();
        let c = derivative_vs_fd(&cm).unwrap();
        assert!(c.passed, "{}", c.detail);
    }
}

//! Panel-wise Gauss–Legendre quadrature on finite and semi-infinite ranges.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of Gauss–Legendre nodes per panel.
    pub panel_order: usize,
    pub max_panels: usize,
    /// Stop once a panel is smaller than this fraction of the largest panel seen.
    pub truncation_ratio: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            panel_order: 32,
            max_panels: 4096,
            truncation_ratio: 1e-10,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason| {
            Err(Error::InvalidParameter {
                name: "quadrature",
                reason,
            })
        };
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.panel_order < 8 {
            return bad("panel_order must be at least 8");
        }
        if self.max_panels == 0 {
            return bad("max_panels must be positive");
        }
        if !(self.truncation_ratio > 0.0 && self.truncation_ratio < 1.0) {
            return bad("truncation_ratio must lie in (0,1)");
        }
        Ok(())
    }

    /// Same configuration with both tolerances scaled by `k`.
    pub fn scaled_tolerances(&self, k: f64) -> Self {
        QuadratureConfig {
            abs_tol: self.abs_tol * k,
            rel_tol: self.rel_tol * k,
            ..*self
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = alloc::vec![0.0; order];
        let mut weights = alloc::vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi initial guess, refined by Newton on P_n
            let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// ∫_a^b f.
    pub fn apply<F>(&self, f: &mut F, a: f64, b: f64) -> Complex64
    where
        F: FnMut(f64) -> Complex64,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(mid + half * x) * *w;
        }
        acc * half
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Wynn's epsilon extrapolation of a sequence of partial sums.
fn wynn_epsilon(seq: &[Complex64]) -> Complex64 {
    let m = seq.len();
    if m < 3 {
        return *seq.last().expect("non-empty sequence");
    }
    // e holds the current column; prev the one before (starting with ε_{-1} = 0)
    let mut prev = alloc::vec![Complex64::new(0.0, 0.0); m + 1];
    let mut cur: Vec<Complex64> = seq.to_vec();
    let mut best = seq[m - 1];
    for col in 1..m {
        let len = m - col;
        let mut next = alloc::vec![Complex64::new(0.0, 0.0); len];
        for j in 0..len {
            let diff = cur[j + 1] - cur[j];
            if diff.norm() < 1e-300 {
                return best;
            }
            next[j] = prev[j + 1] + diff.inv();
        }
        prev = cur;
        cur = next;
        if col % 2 == 0 {
            best = cur[len - 1];
        }
    }
    best
}

/// Number of accepted panels before tail extrapolation is attempted.
const EXTRAPOLATION_START: usize = 40;
const EXTRAPOLATION_WINDOW: usize = 21;

/// ∫_start^∞ f(s) ds by adaptive-width Gauss–Legendre panels.
///
/// Panels start at width 1, double while the two-halves error estimate is far
/// below tolerance and halve on rejection. Integration stops once a panel falls
/// below `truncation_ratio` times the largest panel and the last two panels are
/// each below `abs_tol`. Slowly decaying oscillatory tails that never reach that
/// point fall back to Wynn extrapolation of the partial sums.
pub fn integrate_from<F>(mut f: F, start: f64, cfg: &QuadratureConfig) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    cfg.validate()?;
    let rule = GaussLegendre::new(cfg.panel_order);
    let mut a = start;
    let mut width = 1.0;
    let mut total = Complex64::new(0.0, 0.0);
    let mut peak: f64 = 0.0;
    let mut small_run = 0usize;
    let mut accepted = 0usize;
    let mut partial_sums: Vec<Complex64> = Vec::new();
    let mut extrapolated: Vec<Complex64> = Vec::new();
    let min_width = 1e-9;

    for _ in 0..cfg.max_panels {
        let b = a + width;
        let whole = rule.apply(&mut f, a, b);
        let mid = a + 0.5 * width;
        let halves = rule.apply(&mut f, a, mid) + rule.apply(&mut f, mid, b);
        if !halves.re.is_finite() || !halves.im.is_finite() {
            return Err(Error::DomainError("non-finite integrand"));
        }
        let err = (whole - halves).norm();
        let tol = cfg.abs_tol.max(cfg.rel_tol * (total + halves).norm());
        if err > tol && width > min_width {
            width *= 0.5;
            continue;
        }
        total += halves;
        a = b;
        accepted += 1;
        let mag = halves.norm();
        peak = peak.max(mag);
        if mag < cfg.abs_tol {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 2 && mag < cfg.truncation_ratio * peak.max(cfg.abs_tol) {
            return Ok(total);
        }
        if accepted >= EXTRAPOLATION_START {
            partial_sums.push(total);
            if partial_sums.len() > EXTRAPOLATION_WINDOW {
                partial_sums.remove(0);
            }
            if partial_sums.len() == EXTRAPOLATION_WINDOW {
                extrapolated.push(wynn_epsilon(&partial_sums));
                let k = extrapolated.len();
                if k >= 3 {
                    let e = &extrapolated[k - 3..];
                    let spread = (e[2] - e[1]).norm().max((e[2] - e[0]).norm());
                    if spread <= cfg.abs_tol.max(cfg.rel_tol * e[2].norm()) {
                        return Ok(e[2]);
                    }
                }
            }
        }
        if err <= tol / 64.0 {
            width *= 2.0;
        }
    }
    Err(Error::NoConvergence("semi-infinite quadrature exhausted max_panels"))
}

/// ∫_0^∞ f(s) ds.
pub fn integrate_semi_infinite<F>(f: F, cfg: &QuadratureConfig) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    integrate_from(f, 0.0, cfg)
}

/// ∫_a^b f(x) dx for a real integrand, adaptive bisection with Gauss–Legendre panels.
pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    Ok(integrate_vec(|x| [f(x)], a, b, cfg)?[0])
}

/// Componentwise ∫_a^b of a vector integrand sharing one adaptive partition;
/// a subinterval is accepted once every component meets the tolerance.
pub fn integrate_vec<const K: usize, F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<[f64; K]>
where
    F: FnMut(f64) -> [f64; K],
{
    cfg.validate()?;
    let mut total = [0.0; K];
    if a == b {
        return Ok(total);
    }
    let rule = GaussLegendre::new(cfg.panel_order.min(16));
    let mut apply = |lo: f64, hi: f64| {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (lo + hi);
        let mut acc = [0.0; K];
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let v = f(mid + half * x);
            for k in 0..K {
                acc[k] += v[k] * w;
            }
        }
        acc.map(|x| x * half)
    };
    let first = apply(a, b);
    let mut stack: Vec<(f64, f64, [f64; K])> = alloc::vec![(a, b, first)];
    let mut evaluations = 0usize;
    let span = (b - a).abs();
    while let Some((lo, hi, whole)) = stack.pop() {
        evaluations += 1;
        if evaluations > 64 * cfg.max_panels {
            return Err(Error::NoConvergence("finite quadrature exhausted max_panels"));
        }
        let mid = 0.5 * (lo + hi);
        let left = apply(lo, mid);
        let right = apply(mid, hi);
        let share = (hi - lo).abs() / span;
        let mut accept = (hi - lo).abs() < 1e-12 * span;
        let mut all_ok = true;
        for k in 0..K {
            let halves = left[k] + right[k];
            if !halves.is_finite() {
                return Err(Error::DomainError("non-finite integrand"));
            }
            let tol = (cfg.abs_tol * share).max(cfg.rel_tol * halves.abs());
            if (whole[k] - halves).abs() > tol {
                all_ok = false;
            }
        }
        accept |= all_ok;
        if accept {
            for k in 0..K {
                total[k] += left[k] + right[k];
            }
        } else {
            stack.push((lo, mid, left));
            stack.push((mid, hi, right));
        }
    }
    Ok(total)
}

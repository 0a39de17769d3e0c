//! Euler–Maruyama simulation of the Wishart SDE and pathwise estimators.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path index)`,
//! so any partition of the path range into chunks reproduces the same per-path
//! values. Reductions run sequentially over the stored per-path values.

use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::wishart::WishartParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub horizon: f64,
    /// Eigenvalues below this value are lifted to it after every step.
    pub psd_floor: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 200_000,
            dt: 1.0 / 500.0,
            seed: 20_240_601,
            horizon: 2.0,
            psd_floor: 0.0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason| {
            Err(Error::InvalidParameter {
                name: "mc",
                reason,
            })
        };
        if self.paths == 0 {
            return bad("paths must be positive");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return bad("horizon must be non-negative");
        }
        if !(self.psd_floor >= 0.0) {
            return bad("psd_floor must be non-negative");
        }
        Ok(())
    }

    /// Number of Euler steps; the step is shortened so the grid ends at the horizon.
    pub fn steps(&self) -> usize {
        if self.horizon == 0.0 {
            0
        } else {
            libm::ceil(self.horizon / self.dt - 1e-9).max(1.0) as usize
        }
    }

    pub fn effective_dt(&self) -> f64 {
        let k = self.steps();
        if k == 0 {
            0.0
        } else {
            self.horizon / k as f64
        }
    }
}

/// Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub paths_used: usize,
}

impl McEstimate {
    /// Sample mean and `std/√N`, accumulated in index order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return McEstimate {
                value: f64::NAN,
                std_error: f64::NAN,
                paths_used: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
        let var = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };
        McEstimate {
            value: mean,
            std_error: libm::sqrt(var / n as f64),
            paths_used: n,
        }
    }

    /// Whether `x` lies within `k` standard errors.
    pub fn contains(&self, x: f64, k: f64) -> bool {
        (x - self.value).abs() <= k * self.std_error
    }
}

/// `(c + tr[h v]) / (d + tr[u v])`, integrated along paths by the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalIntegrand {
    pub c: f64,
    pub h: DMatrix<f64>,
    pub d: f64,
    pub u: DMatrix<f64>,
}

impl RationalIntegrand {
    fn flatten(&self) -> FlatIntegrand {
        // tr[h v] = Σ (hᵀ)_{k} v_{k} over column-major storage
        FlatIntegrand {
            c: self.c,
            h: self.h.transpose().as_slice().to_vec(),
            d: self.d,
            u: self.u.transpose().as_slice().to_vec(),
        }
    }
}

struct FlatIntegrand {
    c: f64,
    h: Vec<f64>,
    d: f64,
    u: Vec<f64>,
}

impl FlatIntegrand {
    #[inline]
    fn eval(&self, v: &[f64]) -> f64 {
        let mut num = self.c;
        let mut den = self.d;
        for k in 0..v.len() {
            num += self.h[k] * v[k];
            den += self.u[k] * v[k];
        }
        num / den
    }
}

/// Terminal states (and optional path integrals) for a contiguous range of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    n: usize,
    first_path: usize,
    /// Column-major `n×n` blocks, one per path.
    terminals: Vec<f64>,
    integrals: Vec<f64>,
    clamped_steps: u64,
    total_steps: u64,
}

impl Simulation {
    pub fn paths(&self) -> usize {
        self.terminals.len() / (self.n * self.n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_path(&self) -> usize {
        self.first_path
    }

    pub fn terminal_slice(&self, i: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.terminals[i * nn..(i + 1) * nn]
    }

    pub fn terminal(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.n, self.terminal_slice(i))
    }

    pub fn terminals(&self) -> impl Iterator<Item = &[f64]> {
        self.terminals.chunks_exact(self.n * self.n)
    }

    /// Pathwise integrals, empty when no integrand was requested.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    /// Fraction of Euler steps whose state needed eigenvalue clamping.
    pub fn clamp_fraction(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.clamped_steps as f64 / self.total_steps as f64
        }
    }

    /// Per-path values of `f(v_T)`.
    pub fn map_terminals<F: FnMut(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.terminals().map(f).collect()
    }

    /// Joins chunks that were simulated over consecutive path ranges.
    pub fn concat(chunks: Vec<Simulation>) -> Result<Simulation> {
        let mut iter = chunks.into_iter();
        let mut out = iter.next().ok_or(Error::InvalidParameter {
            name: "mc",
            reason: "no chunks to join",
        })?;
        for c in iter {
            if c.n != out.n || c.first_path != out.first_path + out.paths() {
                return Err(Error::InvalidParameter {
                    name: "mc",
                    reason: "chunks must cover consecutive path ranges",
                });
            }
            out.terminals.extend_from_slice(&c.terminals);
            out.integrals.extend_from_slice(&c.integrals);
            out.clamped_steps += c.clamped_steps;
            out.total_steps += c.total_steps;
        }
        Ok(out)
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// One Euler step engine; `state` is a column-major `n×n` slice.
trait Engine {
    fn n(&self) -> usize;
    /// Advances `state` by one step; returns whether clamping was applied.
    fn step(&self, state: &mut [f64], rng: &mut ChaCha8Rng) -> bool;
    /// Clamps `state` in place; returns whether anything changed.
    fn clamp(&self, state: &mut [f64]) -> bool;
}

/// Closed-form kernel for `n = 2`.
struct Engine2 {
    omega_dt: Matrix2<f64>,
    m_dt: Matrix2<f64>,
    sigma: Matrix2<f64>,
    sqrt_dt: f64,
    floor: f64,
}

impl Engine2 {
    #[inline]
    fn load(s: &[f64]) -> Matrix2<f64> {
        Matrix2::new(s[0], s[2], s[1], s[3])
    }

    #[inline]
    fn store(m: &Matrix2<f64>, s: &mut [f64]) {
        s[0] = m[(0, 0)];
        s[1] = m[(1, 0)];
        s[2] = m[(0, 1)];
        s[3] = m[(1, 1)];
    }

    /// Square root of a PSD 2×2 matrix: `(v + √det·I)/√(tr v + 2√det)`.
    #[inline]
    fn sqrt_psd(v: &Matrix2<f64>) -> Matrix2<f64> {
        let det = (v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)]).max(0.0);
        let s = libm::sqrt(det);
        let t2 = v[(0, 0)] + v[(1, 1)] + 2.0 * s;
        if t2 <= 0.0 {
            return Matrix2::zeros();
        }
        let t = libm::sqrt(t2);
        Matrix2::new((v[(0, 0)] + s) / t, v[(0, 1)] / t, v[(1, 0)] / t, (v[(1, 1)] + s) / t)
    }

    #[inline]
    fn clamp_matrix(&self, v: &mut Matrix2<f64>) -> bool {
        let a = v[(0, 0)];
        let b = v[(0, 1)];
        let d = v[(1, 1)];
        let half_tr = 0.5 * (a + d);
        let rad = libm::sqrt(0.25 * (a - d) * (a - d) + b * b);
        let lo = half_tr - rad;
        if lo >= self.floor {
            return false;
        }
        let hi = (half_tr + rad).max(self.floor);
        let lo_c = self.floor;
        // unit eigenvector of the larger eigenvalue
        let (x, y) = if rad == 0.0 {
            (1.0, 0.0)
        } else if (half_tr + rad - d).abs() >= (half_tr + rad - a).abs() {
            let (x, y) = (half_tr + rad - d, b);
            let r = libm::sqrt(x * x + y * y);
            (x / r, y / r)
        } else {
            let (x, y) = (b, half_tr + rad - a);
            let r = libm::sqrt(x * x + y * y);
            (x / r, y / r)
        };
        let off = (hi - lo_c) * x * y;
        *v = Matrix2::new(
            lo_c + (hi - lo_c) * x * x,
            off,
            off,
            lo_c + (hi - lo_c) * y * y,
        );
        true
    }
}

impl Engine for Engine2 {
    fn n(&self) -> usize {
        2
    }

    #[inline]
    fn step(&self, state: &mut [f64], rng: &mut ChaCha8Rng) -> bool {
        let v = Self::load(state);
        let root = Self::sqrt_psd(&v);
        let z: [f64; 4] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let dw = Matrix2::new(z[0], z[1], z[2], z[3]) * self.sqrt_dt;
        let noise = root * dw * self.sigma;
        let mv = self.m_dt * v;
        let mut next = v + self.omega_dt + mv + mv.transpose() + noise + noise.transpose();
        let off = 0.5 * (next[(0, 1)] + next[(1, 0)]);
        next[(0, 1)] = off;
        next[(1, 0)] = off;
        let clamped = self.clamp_matrix(&mut next);
        Self::store(&next, state);
        clamped
    }

    fn clamp(&self, state: &mut [f64]) -> bool {
        let mut v = Self::load(state);
        let c = self.clamp_matrix(&mut v);
        Self::store(&v, state);
        c
    }
}

/// Dense kernel for any dimension.
struct EngineN {
    n: usize,
    omega_dt: DMatrix<f64>,
    m_dt: DMatrix<f64>,
    sigma: DMatrix<f64>,
    sqrt_dt: f64,
    floor: f64,
}

impl EngineN {
    fn clamp_matrix(&self, v: &mut DMatrix<f64>) -> bool {
        let eig = SymmetricEigen::new(v.clone());
        if eig.eigenvalues.iter().all(|&l| l >= self.floor) {
            return false;
        }
        let lifted = eig.eigenvalues.map(|l| l.max(self.floor));
        let q = &eig.eigenvectors;
        *v = q * DMatrix::from_diagonal(&lifted) * q.transpose();
        symmetrize_in_place(v);
        true
    }
}

fn symmetrize_in_place(v: &mut DMatrix<f64>) {
    let n = v.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (v[(i, j)] + v[(j, i)]);
            v[(i, j)] = a;
            v[(j, i)] = a;
        }
    }
}

impl Engine for EngineN {
    fn n(&self) -> usize {
        self.n
    }

    fn step(&self, state: &mut [f64], rng: &mut ChaCha8Rng) -> bool {
        let n = self.n;
        let v = DMatrix::from_column_slice(n, n, state);
        let eig = SymmetricEigen::new(v.clone());
        let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        let dw = DMatrix::from_fn(n, n, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z * self.sqrt_dt
        });
        let noise = root * dw * &self.sigma;
        let mv = &self.m_dt * &v;
        let mut next = &v + &self.omega_dt + &mv + mv.transpose() + &noise + noise.transpose();
        symmetrize_in_place(&mut next);
        let clamped = self.clamp_matrix(&mut next);
        state.copy_from_slice(next.as_slice());
        clamped
    }

    fn clamp(&self, state: &mut [f64]) -> bool {
        let n = self.n;
        let mut v = DMatrix::from_column_slice(n, n, state);
        let c = self.clamp_matrix(&mut v);
        state.copy_from_slice(v.as_slice());
        c
    }
}

fn build_engine(p: &WishartParams, cfg: &McConfig) -> alloc::boxed::Box<dyn EngineDyn> {
    let dt = cfg.effective_dt();
    let n = p.n();
    if n == 2 {
        let to2 = |m: &DMatrix<f64>| Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        alloc::boxed::Box::new(Engine2 {
            omega_dt: to2(p.omega().as_matrix()) * dt,
            m_dt: to2(p.m()) * dt,
            sigma: to2(p.sigma().as_matrix()),
            sqrt_dt: libm::sqrt(dt),
            floor: cfg.psd_floor,
        })
    } else {
        alloc::boxed::Box::new(EngineN {
            n,
            omega_dt: p.omega().as_matrix() * dt,
            m_dt: p.m() * dt,
            sigma: p.sigma().as_matrix().clone(),
            sqrt_dt: libm::sqrt(dt),
            floor: cfg.psd_floor,
        })
    }
}

/// Object-safe driver so the per-step loop is monomorphized per engine.
trait EngineDyn {
    fn run(
        &self,
        v0: &[f64],
        cfg: &McConfig,
        paths: Range<usize>,
        integrand: Option<&FlatIntegrand>,
        observer: &mut dyn FnMut(usize, usize, &[f64]),
        observe_every: usize,
    ) -> Simulation;
}

impl<E: Engine> EngineDyn for E {
    fn run(
        &self,
        v0: &[f64],
        cfg: &McConfig,
        paths: Range<usize>,
        integrand: Option<&FlatIntegrand>,
        observer: &mut dyn FnMut(usize, usize, &[f64]),
        observe_every: usize,
    ) -> Simulation {
        let n = self.n();
        let nn = n * n;
        let steps = cfg.steps();
        let dt = cfg.effective_dt();
        let count = paths.len();
        let mut terminals = Vec::with_capacity(count * nn);
        let mut integrals = Vec::with_capacity(if integrand.is_some() { count } else { 0 });
        let mut clamped_steps = 0u64;
        let mut state = alloc::vec![0.0; nn];
        for path in paths.clone() {
            let mut rng = path_rng(cfg.seed, path);
            state.copy_from_slice(v0);
            if self.clamp(&mut state) {
                clamped_steps += 1;
            }
            let mut acc = 0.0;
            let mut prev = integrand.map(|f| f.eval(&state)).unwrap_or(0.0);
            if observe_every > 0 {
                observer(path, 0, &state);
            }
            for k in 1..=steps {
                if self.step(&mut state, &mut rng) {
                    clamped_steps += 1;
                }
                if let Some(f) = integrand {
                    let cur = f.eval(&state);
                    acc += 0.5 * (prev + cur) * dt;
                    prev = cur;
                }
                if observe_every > 0 && k % observe_every == 0 {
                    observer(path, k, &state);
                }
            }
            terminals.extend_from_slice(&state);
            if integrand.is_some() {
                integrals.push(acc);
            }
        }
        Simulation {
            n,
            first_path: paths.start,
            terminals,
            integrals,
            clamped_steps,
            total_steps: (steps as u64) * count as u64,
        }
    }
}

/// Simulates paths `range` (a sub-range of `0..cfg.paths`).
pub fn simulate_range(
    p: &WishartParams,
    cfg: &McConfig,
    range: Range<usize>,
    integrand: Option<&RationalIntegrand>,
) -> Result<Simulation> {
    cfg.validate()?;
    if range.end > cfg.paths {
        return Err(Error::InvalidParameter {
            name: "mc",
            reason: "path range exceeds configured paths",
        });
    }
    let engine = build_engine(p, cfg);
    let flat = integrand.map(|f| f.flatten());
    let v0 = p.v0().as_matrix().as_slice().to_vec();
    Ok(engine.run(&v0, cfg, range, flat.as_ref(), &mut |_, _, _| {}, 0))
}

/// Simulates all `cfg.paths` paths to the horizon.
pub fn simulate_terminal(
    p: &WishartParams,
    cfg: &McConfig,
    integrand: Option<&RationalIntegrand>,
) -> Result<Simulation> {
    simulate_range(p, cfg, 0..cfg.paths, integrand)
}

/// States visited every `every` steps along all paths (including the start).
pub fn sample_states(p: &WishartParams, cfg: &McConfig, every: usize) -> Result<Vec<DMatrix<f64>>> {
    cfg.validate()?;
    let every = every.max(1);
    let engine = build_engine(p, cfg);
    let v0 = p.v0().as_matrix().as_slice().to_vec();
    let n = p.n();
    let mut out = Vec::new();
    engine.run(
        &v0,
        cfg,
        0..cfg.paths,
        None,
        &mut |_, _, s| out.push(DMatrix::from_column_slice(n, n, s)),
        every,
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{SpdMatrix, SymMatrix};
    use crate::wishart::{tests::reference, trace_mean_coeffs, ConditionalMoments};

    fn small_cfg(paths: usize) -> McConfig {
        McConfig {
            paths,
            dt: 1.0 / 100.0,
            horizon: 2.0,
            ..Default::default()
        }
    }

    #[test]
    fn estimate_statistics() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        assert!((e.std_error - libm::sqrt(5.0 / 3.0 / 4.0)).abs() < 1e-15);
        assert!(e.contains(2.6, 1.0));
    }

    #[test]
    fn deterministic_limit_matches_linear_ode() {
        let p = reference();
        let tiny = SpdMatrix::from_row_slice(2, &[1e-8, 0.0, 0.0, 1e-8]).unwrap();
        let q = WishartParams::new(3.5, tiny, p.m().clone(), p.v0().clone()).unwrap();
        let cfg = McConfig {
            paths: 4,
            dt: 1.0 / 20_000.0,
            horizon: 2.0,
            ..Default::default()
        };
        let sim = simulate_terminal(&q, &cfg, None).unwrap();
        let basis = [(0, 0), (1, 1), (0, 1)];
        for (i, j) in basis {
            let mut u = DMatrix::zeros(2, 2);
            u[(i, j)] = 1.0;
            u[(j, i)] = 1.0;
            let exact = trace_mean_coeffs(&q, &u, 2.0).apply(q.v0().as_matrix());
            let got = crate::numerics::trace_of_product(&u, &sim.terminal(0));
            assert!((got - exact).abs() < 1e-3 * exact.abs(), "{got} vs {exact}");
        }
    }

    #[test]
    fn chunking_is_bit_identical() {
        let p = reference();
        let cfg = small_cfg(40);
        let whole = simulate_terminal(&p, &cfg, None).unwrap();
        let parts = alloc::vec![
            simulate_range(&p, &cfg, 0..13, None).unwrap(),
            simulate_range(&p, &cfg, 13..29, None).unwrap(),
            simulate_range(&p, &cfg, 29..40, None).unwrap(),
        ];
        let joined = Simulation::concat(parts).unwrap();
        assert_eq!(whole, joined);
    }

    #[test]
    fn generic_engine_agrees_in_distribution_with_closed_form_kernel() {
        // the dense kernel is used for n != 2; check it on a 3×3 diagonal-embedding
        let p3 = WishartParams::new(
            4.5,
            SpdMatrix::from_row_slice(3, &[0.06, 0.01, 0.0, 0.01, 0.04, 0.0, 0.0, 0.0, 0.05]).unwrap(),
            -DMatrix::<f64>::identity(3, 3),
            SpdMatrix::from_row_slice(3, &[0.005, 0.001, 0.0, 0.001, 0.0025, 0.0, 0.0, 0.0, 0.003]).unwrap(),
        )
        .unwrap();
        let cfg = small_cfg(4000);
        let sim = simulate_terminal(&p3, &cfg, None).unwrap();
        let u = DMatrix::<f64>::identity(3, 3);
        let vals = sim.map_terminals(|s| s[0] + s[4] + s[8]);
        let est = McEstimate::from_samples(&vals);
        let exact = trace_mean_coeffs(&p3, &u, 2.0).apply(p3.v0().as_matrix());
        assert!(est.contains(exact, 4.0), "{est:?} vs {exact}");
    }

    #[test]
    fn trace_mean_and_mgf_within_three_se() {
        let p = reference();
        let cfg = small_cfg(20_000);
        let sim = simulate_terminal(&p, &cfg, None).unwrap();
        let vals = sim.map_terminals(|s| s[0] + s[3]);
        let est = McEstimate::from_samples(&vals);
        let exact = trace_mean_coeffs(&p, &DMatrix::identity(2, 2), 2.0).apply(p.v0().as_matrix());
        assert!(est.contains(exact, 3.0), "{est:?} vs {exact}");

        let cm = ConditionalMoments::new(&p, 2.0).unwrap();
        let phi = cm.mgf_real(&SymMatrix::identity(2).scale(-0.5)).unwrap();
        let vals = sim.map_terminals(|s| libm::exp(-0.5 * (s[0] + s[3])));
        let est = McEstimate::from_samples(&vals);
        assert!(est.contains(phi, 3.0), "{est:?} vs {phi}");
        assert!(sim.clamp_fraction() < 0.01);
    }

    #[test]
    fn clamp_keeps_states_psd() {
        let p = reference();
        let cfg = McConfig {
            paths: 50,
            dt: 1.0 / 20.0,
            horizon: 5.0,
            ..Default::default()
        };
        let states = sample_states(&p, &cfg, 1).unwrap();
        assert_eq!(states.len(), 50 * 101);
        for s in states {
            let sym = SymMatrix::new(s).unwrap();
            assert!(crate::numerics::min_eigenvalue(&sym) >= -1e-15);
        }
    }

    #[test]
    fn trapezoid_integral_of_constant() {
        let p = reference();
        let cfg = small_cfg(3);
        let f = RationalIntegrand {
            c: 0.7,
            h: DMatrix::zeros(2, 2),
            d: 1.0,
            u: DMatrix::zeros(2, 2),
        };
        let sim = simulate_terminal(&p, &cfg, Some(&f)).unwrap();
        for v in sim.integrals() {
            assert!((v - 1.4).abs() < 1e-12);
        }
    }
}

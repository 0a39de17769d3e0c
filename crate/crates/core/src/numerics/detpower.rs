//! Non-integer powers of complex determinants with explicit branch bookkeeping.

use core::f64::consts::PI;

use nalgebra::{linalg::Schur, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `det(M)^p` evaluated as `exp(p·Σ Log λᵢ)` with principal logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPower {
    pub value: Complex64,
    /// `p·Σ ln|λᵢ|`.
    pub log_abs: f64,
    /// `Σ Arg λᵢ` (principal arguments, not multiplied by `p`).
    pub phase: f64,
}

/// Eigenvalues smaller than this (relative to the largest) count as zero.
const SINGULAR_TOL: f64 = 1e-14;

/// `det(M)^p` from an already known spectrum.
pub fn det_power_from_eigenvalues<I>(eigenvalues: I, p: f64) -> Result<DetPower>
where
    I: IntoIterator<Item = Complex64>,
{
    let mut log_abs = 0.0;
    let mut phase = 0.0;
    for lambda in eigenvalues {
        let r = lambda.norm();
        if !(r > f64::MIN_POSITIVE) || !r.is_finite() {
            return Err(Error::SingularMatrix);
        }
        log_abs += libm::log(r);
        phase += lambda.arg();
    }
    let log_abs = p * log_abs;
    let value = Complex64::from_polar(libm::exp(log_abs), p * phase);
    Ok(DetPower {
        value,
        log_abs,
        phase,
    })
}

/// `det(M)^p` with the principal branch taken per eigenvalue of `M`.
pub fn complex_log_det_power(m: &DMatrix<Complex64>, p: f64) -> Result<DetPower> {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return det_power_from_eigenvalues(core::iter::empty(), p);
    }
    let eig: alloc::vec::Vec<Complex64> = if n == 1 {
        alloc::vec![m[(0, 0)]]
    } else {
        let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
            .ok_or(Error::NoConvergence("complex Schur decomposition"))?;
        let (_, t) = schur.unpack();
        (0..n).map(|i| t[(i, i)]).collect()
    };
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if eig.iter().any(|z| z.norm() <= SINGULAR_TOL * scale.max(1.0)) {
        return Err(Error::SingularMatrix);
    }
    det_power_from_eigenvalues(eig, p)
}

/// Watches the summed principal phase along a path and rejects jumps that
/// indicate an eigenvalue crossed the negative real axis.
#[derive(Debug, Clone)]
pub struct PhaseMonitor {
    last: Option<f64>,
    last_at: f64,
    max_jump: f64,
    worst: f64,
}

impl Default for PhaseMonitor {
    fn default() -> Self {
        Self::new(PI / 4.0)
    }
}

impl PhaseMonitor {
    pub fn new(max_jump: f64) -> Self {
        PhaseMonitor {
            last: None,
            last_at: f64::NEG_INFINITY,
            max_jump,
            worst: 0.0,
        }
    }

    /// Records the phase observed at path position `at`.
    pub fn observe(&mut self, at: f64, phase: f64) -> Result<()> {
        if let Some(prev) = self.last {
            let jump = (phase - prev).abs();
            if jump > self.worst {
                self.worst = jump;
            }
            if jump > self.max_jump {
                return Err(Error::BranchJump { at, jump });
            }
        }
        self.last = Some(phase);
        self.last_at = at;
        Ok(())
    }

    /// Like [`observe`](Self::observe) but ignores points at or behind the last
    /// observed position, so an adaptive integrator that revisits subintervals
    /// is checked along a monotone subsequence of its nodes.
    pub fn observe_forward(&mut self, at: f64, phase: f64) -> Result<()> {
        if self.last.is_some() && at <= self.last_at {
            return Ok(());
        }
        self.observe(at, phase)
    }

    /// Largest jump seen so far.
    pub fn worst_jump(&self) -> f64 {
        self.worst
    }

    pub fn reset(&mut self) {
        self.last = None;
        self.last_at = f64::NEG_INFINITY;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_diagonal() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        let d = complex_log_det_power(&id, 1.75).unwrap();
        assert!((d.value - c(1.0, 0.0)).norm() < 1e-15);

        let m = DMatrix::from_row_slice(2, 2, &[c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let d = complex_log_det_power(&m, 0.5).unwrap();
        assert!((d.value - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn matches_determinant_for_integer_power() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 2.0),
                c(0.3, -0.1),
                c(0.0, 0.5),
                c(-0.2, 0.0),
                c(2.0, -1.0),
                c(0.7, 0.0),
                c(0.1, 0.1),
                c(0.0, 0.0),
                c(-1.0, 0.3),
            ],
        );
        let det = m.clone().lu().determinant();
        let d = complex_log_det_power(&m, 1.0).unwrap();
        assert!((d.value - det).norm() < 1e-12 * det.norm());
        let d2 = complex_log_det_power(&m, 2.0).unwrap();
        assert!((d2.value - det * det).norm() < 1e-12 * det.norm_sqr());
    }

    #[test]
    fn singular_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert_eq!(complex_log_det_power(&m, 0.5), Err(Error::SingularMatrix));
    }

    #[test]
    fn monitor_flags_jumps() {
        let mut mon = PhaseMonitor::default();
        mon.observe(0.0, 0.0).unwrap();
        mon.observe(0.1, 0.5).unwrap();
        let err = mon.observe(0.2, 0.5 + 1.0).unwrap_err();
        assert_eq!(err.name(), "BranchJump");
    }
}

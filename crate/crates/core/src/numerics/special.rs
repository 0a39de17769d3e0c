//! Special functions: incomplete gamma, Pochhammer symbol, normal law and the
//! noncentral chi-square law.

use num_complex::Complex64;

use crate::error::{Error, Result};

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Lower regularized incomplete gamma `P(s, x)`.
pub fn regularized_gamma_lower(s: f64, x: f64) -> Result<f64> {
    check_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        gamma_series(s, x)
    } else {
        Ok(1.0 - gamma_continued_fraction(s, x)?)
    }
}

/// Upper regularized incomplete gamma `Q(s, x) = Γ(s, x)/Γ(s)`.
pub fn regularized_gamma_upper(s: f64, x: f64) -> Result<f64> {
    check_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < s + 1.0 {
        Ok(1.0 - gamma_series(s, x)?)
    } else {
        gamma_continued_fraction(s, x)
    }
}

fn check_gamma_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DomainError("incomplete gamma needs s > 0"));
    }
    if !(x >= 0.0) {
        return Err(Error::DomainError("incomplete gamma needs x >= 0"));
    }
    Ok(())
}

fn log_prefactor(s: f64, x: f64) -> f64 {
    s * libm::log(x) - x - libm::lgamma(s)
}

fn gamma_series(s: f64, x: f64) -> Result<f64> {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..GAMMA_MAX_ITER {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            return Ok((sum * libm::exp(log_prefactor(s, x))).min(1.0));
        }
    }
    Err(Error::NoConvergence("incomplete gamma series"))
}

// modified Lentz evaluation of the continued fraction for Q
fn gamma_continued_fraction(s: f64, x: f64) -> Result<f64> {
    let tiny = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            return Ok((libm::exp(log_prefactor(s, x)) * h).clamp(0.0, 1.0));
        }
    }
    Err(Error::NoConvergence("incomplete gamma continued fraction"))
}

/// Rising factorial `(x)_n`.
pub fn pochhammer(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, k| acc * (x + k as f64))
}

pub fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// `E[e^{iz X}]` for a noncentral chi-square `X` with `dof` degrees of freedom
/// and noncentrality `noncentrality`, principal branch for the power.
pub fn noncentral_chisq_cf(z: Complex64, dof: f64, noncentrality: f64) -> Complex64 {
    let iz = Complex64::new(0.0, 1.0) * z;
    let base = Complex64::new(1.0, 0.0) - iz * 2.0;
    let exponent = iz * noncentrality / base - base.ln() * (0.5 * dof);
    exponent.exp()
}

/// Density of the noncentral chi-square law as a Poisson mixture of central
/// chi-square densities.
pub fn noncentral_chisq_pdf(x: f64, dof: f64, noncentrality: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        // only the j = 0 term can be non-zero at the origin
        return if dof < 2.0 {
            f64::INFINITY
        } else if dof == 2.0 {
            0.5 * libm::exp(-0.5 * noncentrality)
        } else {
            0.0
        };
    }
    let half = 0.5 * noncentrality;
    if half == 0.0 {
        return libm::exp(log_chisq_pdf(x, dof));
    }
    // start from the Poisson mode and sum outwards in both directions
    let mode = libm::floor(half) as i64;
    let log_poisson =
        |j: i64| -half + j as f64 * libm::log(half) - libm::lgamma(j as f64 + 1.0);
    let term = |j: i64| libm::exp(log_poisson(j) + log_chisq_pdf(x, dof + 2.0 * j as f64));
    let mut sum = term(mode);
    let mut j = mode + 1;
    loop {
        let t = term(j);
        sum += t;
        if t <= 1e-17 * sum && j > mode + 5 {
            break;
        }
        j += 1;
        if j > mode + 100_000 {
            break;
        }
    }
    let mut j = mode - 1;
    while j >= 0 {
        let t = term(j);
        sum += t;
        if t <= 1e-17 * sum && j < mode - 5 {
            break;
        }
        j -= 1;
    }
    sum
}

fn log_chisq_pdf(x: f64, k: f64) -> f64 {
    (0.5 * k - 1.0) * libm::log(x) - 0.5 * x - 0.5 * k * core::f64::consts::LN_2 - libm::lgamma(0.5 * k)
}

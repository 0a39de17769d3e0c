//! Numerical building blocks shared by the model layers.

pub mod detpower;
pub mod linalg;
pub mod quadrature;
pub mod special;

pub use detpower::{complex_log_det_power, det_power_from_eigenvalues, DetPower, PhaseMonitor};
pub use linalg::{
    complexify, general_eigenvalues, kron, mat_exp, max_eigenvalue, matrix_sqrt, min_eigenvalue, solve, spectral_decomp, trace_of_product, unvec, vec, Spectral, SpdMatrix,
    SymMatrix,
};
pub use quadrature::{integrate, integrate_from, integrate_vec, integrate_semi_infinite, QuadratureConfig};
pub use special::{
    noncentral_chisq_cf, noncentral_chisq_pdf, normal_cdf, normal_pdf, pochhammer,
    regularized_gamma_lower, regularized_gamma_upper,
};

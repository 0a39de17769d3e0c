use core::fmt;

/// Failure modes of the model, pricing and numerical layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a model invariant (`name` is the invariant, `reason` says why).
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    NotSymmetric,
    NotPositiveDefinite,
    SingularMatrix,
    /// The conditional covariance ς_t is numerically singular (horizon too short).
    SingularHorizon,
    /// A real MGF argument lies outside the domain where the transform is finite.
    OutOfDomain,
    DampingOutOfDomain {
        damping: f64,
        bound: f64,
    },
    /// Special function evaluated outside its domain.
    DomainError(&'static str),
    NoConvergence(&'static str),
    /// The summed determinant phase jumped by more than the allowed amount between
    /// two consecutive evaluation points.
    BranchJump {
        at: f64,
        jump: f64,
    },
    DegenerateVariance,
    MixedEigenvalues,
    BracketFailure,
}

impl Error {
    /// Short variant name, used for diagnostics and CLI exit reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NotSymmetric => "NotSymmetric",
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::SingularMatrix => "SingularMatrix",
            Error::SingularHorizon => "SingularHorizon",
            Error::OutOfDomain => "OutOfDomain",
            Error::DampingOutOfDomain { .. } => "DampingOutOfDomain",
            Error::DomainError(_) => "DomainError",
            Error::NoConvergence(_) => "NoConvergence",
            Error::BranchJump { .. } => "BranchJump",
            Error::DegenerateVariance => "DegenerateVariance",
            Error::MixedEigenvalues => "MixedEigenvalues",
            Error::BracketFailure => "BracketFailure",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotSymmetric => f.write_str("matrix is not symmetric"),
            Error::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
            Error::SingularMatrix => f.write_str("matrix is numerically singular"),
            Error::SingularHorizon => {
                f.write_str("conditional covariance is singular at this horizon")
            }
            Error::OutOfDomain => f.write_str("argument outside the MGF domain"),
            Error::DampingOutOfDomain { damping, bound } => write!(
                f,
                "damping {damping} outside the MGF domain (|z_i| must be below {bound})"
            ),
            Error::DomainError(what) => write!(f, "domain error: {what}"),
            Error::NoConvergence(what) => write!(f, "no convergence: {what}"),
            Error::BranchJump { at, jump } => write!(
                f,
                "determinant phase jumped by {jump} rad at s = {at}; branch continuity lost"
            ),
            Error::DegenerateVariance => f.write_str("degenerate (zero) variance"),
            Error::MixedEigenvalues => {
                f.write_str("eigenvalues of mixed sign; gamma expansion not applicable")
            }
            Error::BracketFailure => f.write_str("could not bracket the root"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

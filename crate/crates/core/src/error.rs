use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("frequency is rational within working precision (continued fraction terminated after {depth} terms)")]
    RationalDetected { depth: usize },

    #[error("working precision exhausted at continued-fraction depth {depth} (q_n = {q})")]
    PrecisionExhausted { depth: usize, q: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration did not converge within {depth_cap} steps (spread {spread:.3e})")]
    NoConvergence { depth_cap: usize, spread: f64 },

    #[error("cocycle product overflowed")]
    Overflow,

    #[error("reduction is not contracting at iteration {iteration}: |w| went from {previous:.3e} to {current:.3e}")]
    NotContracting {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used in run manifests.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RationalDetected { .. } => "rational_detected",
            Error::PrecisionExhausted { .. } => "precision_exhausted",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Overflow => "overflow",
            Error::NotContracting { .. } => "not_contracting",
            Error::NotUnimodular { .. } => "not_unimodular",
            Error::PreconditionFailed(_) => "precondition_failed",
            Error::Io(_) => "io_error",
        }
    }

    /// True for failures of an iterative method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NotContracting { .. }
                | Error::Overflow
                | Error::PrecisionExhausted { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

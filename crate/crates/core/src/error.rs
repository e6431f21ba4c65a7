use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weak cooperative condition c1/c2 < b1/b2 < a1/a2 violated")]
    NotWeaklyCooperative,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("singular matrix: zero pivot at index {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("branch switch failed for mode {j}: {reason}")]
    SwitchFailed { j: usize, reason: String },

    #[error("limit system regime error: {0}")]
    Regime(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("positivity violated: min nodal value {min:.3e}")]
    Positivity { min: f64 },

    #[error("classification undefined: {0}")]
    Undefined(String),

    #[error("io: {0}")]
    Io(String),
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

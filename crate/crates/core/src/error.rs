use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied parameter failed validation.
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// A closed-form mode was requested for a configuration that does not
    /// satisfy the coefficient equalities the mode family needs.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("state dimension {dim} exceeds the dense solver cap {cap}; use fewer elements")]
    TooLarge { dim: usize, cap: usize },

    #[error("linear algebra failure: {0}")]
    Solver(String),

    #[error("shift i*{lambda} is a pole of the resolvent (nearest eigenvalue {nearest})")]
    Pole { lambda: f64, nearest: Complex64 },

    #[error("mode interpolates to the zero state")]
    DegenerateMode,

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Config(_))
    }
}

use thiserror::Error;

/// Errors produced by the set algebra, the bound tables, the optimal control
/// problem and the closed-loop machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program failed numerically: {0}")]
    NumericFailure(String),

    #[error("unbounded linear program: {0}")]
    Unbounded(String),

    #[error("empty polytope: {0}")]
    EmptySet(String),

    /// A guarantee that must hold by construction was violated at runtime.
    #[error("theorem violation at step {step}: {detail}")]
    TheoremViolation { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(op: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::Dimension {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

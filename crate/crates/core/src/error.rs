use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("variable {var} out of range 1..={num_vars}")]
    VariableOutOfRange { var: usize, num_vars: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An empty clause was derived; the formula is unsatisfiable.
    #[error("conflict: empty clause derived")]
    Conflict,

    #[error("assignment does not satisfy the formula ({unsatisfied} clauses falsified)")]
    NotAModel { unsatisfied: usize },

    #[error("instance has no ground truth")]
    NoGroundTruth,

    /// Raised when model reconstruction finds no value for an eliminated
    /// variable. This indicates a bug in preprocessing, never bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

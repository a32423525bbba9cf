use thiserror::Error;

/// Errors raised by the speed-limit toolkit.
#[derive(Debug, Error)]
pub enum QslError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Every optimizer start landed on a point whose drift commutator was
    /// below the denominator floor.
    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),

    #[error("gate unreachable within budget: {0}")]
    Unreachable(String),

    #[error("time budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl From<serde_json::Error> for QslError {
    fn from(e: serde_json::Error) -> Self {
        QslError::Serialization(e.to_string())
    }
}

impl From<csv::Error> for QslError {
    fn from(e: csv::Error) -> Self {
        QslError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QslError>;

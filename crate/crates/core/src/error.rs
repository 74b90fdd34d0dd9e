use thiserror::Error;

/// Errors raised while building or evaluating a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("series is empty")]
    EmptySeries,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least {needed} presample values, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("series of length {len} is too short (need more than {needed})")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("lag {lag} out of range 1..={q}")]
    LagOutOfRange { lag: usize, q: usize },
    #[error("domain error at index {index}: {message}")]
    Domain { index: usize, message: String },
    #[error("simulation diverged at time index {step} (value {value})")]
    Explosive { step: usize, value: f64 },
    #[error("invalid model JSON: {0}")]
    Json(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

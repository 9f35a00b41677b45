use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("spectrum violation: {0}")]
    SpectrumViolation(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("gap violation: measured contraction factor {factor:.4} >= 1")]
    GapViolation { factor: f64 },
    #[error("convergence failure after {iterations} iterations (last update {last_update:.3e}): {detail}")]
    ConvergenceFailure {
        iterations: usize,
        last_update: f64,
        detail: String,
    },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

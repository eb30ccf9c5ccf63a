use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("precondition violation: {0}")]
    PreconditionViolation(String),
    #[error("weight is not integrable on (0,1): {0}")]
    NonIntegrableWeight(String),
    #[error("resolution too coarse: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResolutionTooCoarse { residual: f64, tolerance: f64 },
    #[error("unsupported associate norm: {0}")]
    UnsupportedAssociate(String),
    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("jet order exhausted: {0}")]
    OrderExhausted(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("boundary flux {flux:.3e} exceeds {limit:.1e} of the initial mass")]
    BoundaryFlux { flux: f64, limit: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

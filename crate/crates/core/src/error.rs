use thiserror::Error;

/// Errors produced by the generation and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A required CSV column could not be resolved.
    #[error("schema error: missing column `{0}`")]
    Schema(String),

    /// Input data violates a contract (empty file, mismatched node counts, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A request that cannot be satisfied (e.g. more edges than node pairs).
    #[error("infeasible request: {0}")]
    Infeasible(String),

    /// Model fitting failed (degenerate initiator, NaN gradient, ...).
    #[error("fit error: {0}")]
    Fit(String),

    /// Feature encoding or decoding failed.
    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for generation, simulation, training and I/O.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter violated a domain constraint (bad config, invalid range).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical procedure failed to converge or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A serialized artifact is malformed or inconsistent.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure in a header or manifest.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn parameter(msg: impl Into<String>) -> Self {
        CoreError::Parameter(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        CoreError::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;

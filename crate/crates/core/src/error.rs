//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("coefficient magnitude exceeded overflow guard at t = {time}")]
    Overflow { time: f64 },

    #[error("fixed-point iteration failed to contract: {0}")]
    FixedPointDiverged(String),

    #[error("certificate level {level} rejected: {reason}")]
    LevelRejected { level: u32, reason: String },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, e.g. a declared column missing from the header.
    #[error("configuration error: {0}")]
    Config(String),

    /// A malformed input record. `line` is 1-based.
    #[error("record error at line {line}: {message}")]
    Record { line: u64, message: String },

    #[error("duplicate scenario id `{0}`")]
    DuplicateScenario(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Event present in every scenario; its Haberman residual is undefined.
    #[error("saturated event: frequency {frequency} equals the number of scenarios")]
    Saturated { frequency: u64 },

    #[error("no scenarios")]
    NoScenarios,

    #[error("graph integrity error: {0}")]
    Integrity(String),

    #[error("viewer assets missing: {0}")]
    MissingAssets(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

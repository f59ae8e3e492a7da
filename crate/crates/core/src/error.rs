use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid span: {0}")]
    InvalidSpan(String),

    #[error("invalid derivation: {0}")]
    Derivation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("plan is infeasible:\n{0}")]
    Infeasible(String),

    #[error("instance {id} cannot be packed: {reason}")]
    Packing { id: String, reason: String },

    #[error("generation client error: {0}")]
    Client(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

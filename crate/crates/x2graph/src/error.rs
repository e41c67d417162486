//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum X2gError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Divergence(String),
}

impl X2gError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        X2gError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 usage, 3 data/format, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            X2gError::Config(_) => 2,
            X2gError::Divergence(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, X2gError>;

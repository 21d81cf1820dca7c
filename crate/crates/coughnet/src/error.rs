//! Error type shared across the pipeline.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("wav error on {path}: {reason}")]
    Wav { path: PathBuf, reason: String },

    #[error("manifest error at {path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid audio: {0}")]
    Audio(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint error on {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-parsable category tag, used by the CLI for one-line
    /// stderr reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Wav { .. } => "wav",
            Error::Manifest { .. } => "manifest",
            Error::Audio(_) => "audio",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non-finite",
            Error::Config(_) => "config",
            Error::Checkpoint { .. } => "checkpoint",
            Error::Metrics(_) => "metrics",
            Error::InvalidArg(_) => "invalid-arg",
        }
    }
}

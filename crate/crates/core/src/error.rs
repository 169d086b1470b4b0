use std::path::PathBuf;

use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum NdudeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The channel matrix is rank deficient (or numerically too close to it)
    /// and has no usable pseudo-inverse.
    #[error("singular channel: {0}")]
    SingularChannel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A soft target vector contained a negative entry.
    #[error("invalid target: {0}")]
    InvalidTarget(String),

    /// A file did not parse as the expected format.
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NdudeError {
    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        NdudeError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NdudeError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, NdudeError>;

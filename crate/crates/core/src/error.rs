//! Error type shared across the pipeline.

use thiserror::Error;

/// Errors produced by the pipeline crates.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A file did not match the expected on-disk format.
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    /// An event frame had the wrong byte length.
    #[error("frame length {got} bytes, expected {expected}")]
    FrameLength { got: usize, expected: usize },

    /// An event frame had an unknown magic byte or version.
    #[error("unsupported frame: {0}")]
    UnsupportedFrame(String),

    /// An event frame failed its integrity checks.
    #[error("corrupted frame: {0}")]
    Corruption(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

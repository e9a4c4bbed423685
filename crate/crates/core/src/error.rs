use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A malformed file. `offset` is the byte offset where decoding failed.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Training or a gradient computation produced a non-finite value.
    #[error("divergence detected in {param} at iteration {iter}")]
    Divergence { param: String, iter: usize },

    #[error("budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset,
        reason: reason.into(),
    }
}

pub(crate) fn shape_err(reason: impl Into<String>) -> Error {
    Error::Shape(reason.into())
}

pub(crate) fn invalid(reason: impl Into<String>) -> Error {
    Error::InvalidArgument(reason.into())
}

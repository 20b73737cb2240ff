//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value failed a construction or parameter-range check.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Two inputs that must agree in shape or length do not.
    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    /// An operation was called outside its domain (e.g. non-positive depth).
    #[error("domain error: {0}")]
    Domain(String),

    /// A policy violated the simulator protocol.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A file did not match its expected format.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

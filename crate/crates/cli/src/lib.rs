//! Library half of the pipeline binary; the CLI surface lives in
//! [`cli`], the batch as subcommand modules under [`commands`].

pub mod cli;
pub mod commands;
pub mod manifest;
pub mod report;

use std::fmt;

/// Errors that should exit with the usage code (2) rather than a failure.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage_error<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

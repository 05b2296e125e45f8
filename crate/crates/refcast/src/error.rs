//! Crate-wide error type.
//!
//! Three variants mirror the failure classes that matter to callers (and map
//! onto the CLI exit-code contract): unreadable or malformed inputs,
//! domain/validation violations, and numerical failures inside the fitting
//! machinery.

/// Errors produced by any operation in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input could not be read or parsed (bad CSV/JSON, missing file).
    #[error("input error: {0}")]
    Input(String),

    /// The input parsed but violates a documented precondition or domain rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical procedure failed (singular design, non-convergence).
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    /// Shorthand for an [`Error::Input`] with a formatted message.
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Shorthand for an [`Error::Validation`] with a formatted message.
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Shorthand for an [`Error::Numeric`] with a formatted message.
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

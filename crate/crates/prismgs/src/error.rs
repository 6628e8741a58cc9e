//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Parse failure in a text format, with the 1-based line number.
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke an API contract (mismatched shapes, stale render state).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: String, expected: String },

    /// Training aborted on a non-finite loss term.
    #[error("non-finite loss at iteration {iteration}: {term}")]
    NonFinite { iteration: usize, term: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

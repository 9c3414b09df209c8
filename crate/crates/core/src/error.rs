use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A matrix to be inverted exceeds the configured condition limit.
    #[error("ill-conditioned matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Dimension {
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The CLI maps [`Error::Parse`] and [`Error::Validation`] to exit code 2 and
/// everything else to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("estimate undefined: {0}")]
    Undefined(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

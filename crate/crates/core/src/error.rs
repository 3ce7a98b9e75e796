use thiserror::Error;

/// Errors surfaced by the library. Internal invariant breaches that the
/// constructions guarantee against are panics, not variants here.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configured search or enumeration budget would be exceeded. This is
    /// never a substitute for a definite answer.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

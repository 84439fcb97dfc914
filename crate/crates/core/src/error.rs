use thiserror::Error;

/// Errors produced by generators, estimators and the serialization layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is out of its documented domain (negative width, empty
    /// word, unknown letter, degenerate lattice basis, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The data does not extend far enough for the requested computation,
    /// e.g. a sampled function whose grid does not cover the averaging
    /// window, or a point set whose window is smaller than [-n, n].
    #[error("insufficient coverage: {0}")]
    Coverage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn coverage(msg: impl Into<String>) -> Error {
    Error::Coverage(msg.into())
}

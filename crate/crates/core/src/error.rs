use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented invariant (shape, Hermiticity, positivity, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// The dynamical map could not be inverted at the given time.
    #[error("dynamical map is singular at t = {t}: |det M| = {det:e}")]
    Singular { t: f64, det: f64 },

    /// A numerical procedure failed to produce a result.
    #[error("analysis failed: {0}")]
    Analysis(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// Parameters violate a structural invariant (ordering, concavity, ranges).
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure failed to reach its tolerance.
    #[error("numeric error: {message} (estimate {value:e}, error {error:e}, {evaluations} evaluations)")]
    Numeric {
        message: String,
        value: f64,
        error: f64,
        evaluations: usize,
    },
    /// Inconsistent combination of arguments.
    #[error("argument error: {0}")]
    Argument(String),
    /// The time integration produced non-finite values.
    #[error("blow-up at t = {t}: {message}")]
    BlowUp { t: f64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("extraction weight at coordinate {index} violates gamma < sigma^-2 (gamma = {gamma}, limit = {limit})")]
    ExtractionViolation { index: usize, gamma: f64, limit: f64 },

    #[error("operation requires p = 2, got p = {0}")]
    RequiresHilbert(f64),

    #[error("quadrature supports dimension <= 3, got {0}")]
    QuadratureDimension(usize),

    #[error("hessian undefined at the origin for p > 2")]
    OriginSingularity,

    #[error("config error{}: {message}", if path.is_empty() { String::new() } else { format!(" at `{path}`") })]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge after {panels} panels (error estimate {error:e}, tolerance {tolerance:e})")]
    NonConvergence {
        panels: usize,
        error: f64,
        tolerance: f64,
    },

    #[error("degenerate SLD basis: {0}")]
    DegenerateBasis(String),

    #[error("operation requires a Gaussian point-spread function")]
    NotGaussianPsf,

    #[error("no photons detected (L = 0)")]
    ZeroPhotons,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

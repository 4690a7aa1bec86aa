use thiserror::Error;

use crate::strength::StrengthResult;

/// Errors produced by state construction, local fitting and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),

    #[error("resource limit: {what} needs {needed}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular ratio at behavior index {index}: q = {q:e}, p = {p:e}")]
    SingularRatio { index: usize, q: f64, p: f64 },

    #[error(
        "local fit not converged after {} iterations (certificate gap {:e})",
        .0.iterations,
        .0.certificate_gap
    )]
    NotConverged(Box<StrengthResult>),

    #[error("eigen-solver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNotConverged { iterations: usize, residual: f64 },

    /// Command-line parse failure, already formatted for display.
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by samplers, distance engines and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or operation parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// The expected amount of work or memory exceeds the configured budget.
    #[error("budget exceeded: expected {estimate:.3e} items, budget {budget:.3e}")]
    Budget { estimate: f64, budget: f64 },

    /// A query violates the precondition of the engine (e.g. window too small).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Too few samples for a statistical procedure.
    #[error("insufficient samples: need {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

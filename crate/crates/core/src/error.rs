use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The objective returned a non-finite value. `last` is the last iterate
    /// at which the objective was finite.
    #[error("optimizer failed: {reason}")]
    Optimizer { reason: String, last: Vec<f64> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("at eta = {eta:?}: {source}")]
    AtNode { eta: Vec<f64>, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_node(self, eta: &[f64]) -> Self {
        Error::AtNode { eta: eta.to_vec(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

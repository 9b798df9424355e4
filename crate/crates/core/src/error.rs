use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad problem name, dimension, start point or solver settings.
    #[error("configuration error: {0}")]
    Config(String),
    /// Index lists or shapes handed to a kernel do not satisfy its contract.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("iterate diverged: {0}")]
    Diverged(String),
    #[error("line search failed after {backtracks} backtracks")]
    LineSearchFailure { backtracks: usize },
    /// A diagnostic was requested at a point where it has no meaning.
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }
}

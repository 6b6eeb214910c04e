use thiserror::Error;

/// Errors raised by the learning engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported question: {0}")]
    UnsupportedQuestion(String),

    #[error("invalid answer: {0}")]
    InvalidAnswer(String),

    #[error("degenerate evidence: every particle assigns zero likelihood to the answer")]
    DegenerateEvidence,

    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),

    #[error("user {user}, round {round}: {source}")]
    Cell {
        user: usize,
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

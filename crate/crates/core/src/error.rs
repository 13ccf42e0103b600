use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("every softmax entry is masked")]
    AllMasked,

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("both mention sets are empty")]
    EmptyMentionSet,

    #[error("relation id {id} outside 1..={m}")]
    BadRelationId { id: usize, m: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("graph has no answer nodes")]
    NoAnswerNodes,

    #[error("no path: {0}")]
    NoPath(String),

    #[error("no question-to-answer triples")]
    NoTriples,

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{count} parameters exceed the finite-difference budget of {cap}")]
    ParamBudgetExceeded { count: usize, cap: usize },

    #[error("path count overflows 64 bits at hop {0}")]
    Overflow(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::DimMismatch(msg.into()))
}

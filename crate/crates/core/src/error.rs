use thiserror::Error;

use crate::qp::QpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidSpec(String),

    #[error("point lies outside the set (violation {violation:.3e})")]
    NotInSet { violation: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("lifted state y_{k}({t}) deviates from its defining recursion by {deviation:.3e}")]
    InconsistentLift { k: usize, t: usize, deviation: f64 },

    #[error("solver finished with status {0:?}")]
    NotOptimal(QpStatus),

    #[error("solution check failed: {0}")]
    Inconsistent(String),

    #[error("search space of {size:.3e} candidates exceeds the cap of {cap:.0e}")]
    SearchSpaceTooLarge { size: f64, cap: f64 },

    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            what: what.into(),
            expected,
            got,
        }
    }

    pub(crate) fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

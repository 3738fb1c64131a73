use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by the loadkit library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no common time range between {left} and {right}")]
    NoCommonRange {
        left: &'static str,
        right: &'static str,
    },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// A malformed input file; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: u64,
        message: String,
    },

    #[error("insufficient history: earliest estimable date is {earliest}")]
    InsufficientHistory { earliest: NaiveDate },

    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("degenerate design matrix: {0}")]
    Degenerate(String),

    #[error("MAPE undefined: actual load is zero at {0}")]
    MapeUndefined(String),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("{0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(path: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped by origin: data/format problems (parsing, log
/// repair, file formats) and numeric problems (non-finite values,
/// divergence). The CLI maps the two groups onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON at line {line}, column {column} (byte offset {offset}): {message}")]
    Json {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },

    #[error("log record {index}: missing field `{field}`")]
    MissingField { index: usize, field: &'static str },

    #[error("log record {index}: bad timestamp `{value}` (expected YYYY-MM-DD HH:MM:SS)")]
    BadTimestamp { index: usize, value: String },

    #[error("unknown action label `{0}`")]
    UnknownAction(String),

    #[error("unknown step kind `{0}` (expected `in` or `out`)")]
    UnknownKind(String),

    #[error("negative interval at step {index} of user `{user}`: cleaning failed")]
    NegativeInterval { user: String, index: usize },

    #[error("negative value {0} where a nonnegative interval was required")]
    NegativeValue(f64),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite value in `{tensor}` at step {step}")]
    NonFinite { tensor: &'static str, step: usize },

    #[error("training diverged at epoch {epoch}, sequence {sequence}")]
    Diverged { epoch: usize, sequence: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Diverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

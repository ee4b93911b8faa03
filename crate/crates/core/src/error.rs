use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced by the toolkit.
///
/// Variants split into two families: input errors (I/O, malformed files,
/// unresolvable ids) and domain errors (well-formed input that violates an
/// operation's preconditions). [`Error::is_input_error`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown benchmark id `{id}` (known ids: {})", known.join(", "))]
    UnknownBenchmark { id: String, known: Vec<String> },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate {what} `{id}` on lines {first_line} and {second_line}")]
    DuplicateId {
        what: &'static str,
        id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedFormat { found: String, supported: u32 },

    #[error("invalid benchmark spec `{id}`: {reason}")]
    InvalidSpec { id: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample {index} is {value}; all samples must be > 0")]
    NonPositiveSample { index: usize, value: f64 },

    #[error("matrix is already standardized")]
    AlreadyStandardized,

    #[error("k = {k} out of range for {rows} rows")]
    KOutOfRange { k: usize, rows: usize },

    #[error("perplexity {perplexity} infeasible for {rows} rows (need 1 < perplexity < {})", rows.saturating_sub(1))]
    InfeasiblePerplexity { perplexity: f64, rows: usize },

    #[error("non-finite value in row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("no run at baseline scale {0}")]
    MissingBaseline(u32),

    #[error("more than one run at scale {0}")]
    DuplicateScale(u32),

    #[error("runs mix {what}: `{first}` and `{second}`")]
    MixedRuns {
        what: &'static str,
        first: String,
        second: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by unreadable or malformed input rather than
    /// by well-formed data breaking a domain rule.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownBenchmark { .. }
                | Error::Parse { .. }
                | Error::DuplicateId { .. }
                | Error::HeaderMismatch { .. }
                | Error::UnsupportedFormat { .. }
                | Error::InvalidSpec { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

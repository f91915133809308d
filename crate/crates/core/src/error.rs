use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("log contains no data rows")]
    EmptyInput,

    #[error("line {line}: unparseable timestamp {value:?}")]
    BadTimestamp { line: usize, value: String },

    #[error("line {line}: timestamp {timestamp} does not follow {previous} (timestamps must strictly increase)")]
    NonIncreasingTimestamp {
        line: usize,
        previous: i64,
        timestamp: i64,
    },

    #[error("day {day}: variable {variable:?} has no observations, cannot fill")]
    Unfillable { day: NaiveDate, variable: String },

    #[error("no log data for day {0}")]
    MissingDay(NaiveDate),

    #[error("need at least {required} training days, got {found}")]
    InsufficientDays { found: usize, required: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("slice {k}: every variable has zero variance")]
    DegenerateSlice { k: usize },

    #[error("slice {k} out of range (model has {len} slices)")]
    SliceOutOfRange { k: usize, len: usize },

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNotConverged { sweeps: usize, off_norm: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid degrees of freedom: need I > R >= 1, got I = {days}, R = {rank}")]
    DegreesOfFreedom { days: usize, rank: usize },

    #[error("threshold {threshold} unreachable with at most {max_rank} components; worst slices (k, explained): {worst:?}")]
    UnreachableThreshold {
        threshold: f64,
        max_rank: usize,
        worst: Vec<(usize, f64)>,
    },

    #[error("slice {k}: {source}")]
    AtSlice {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario line {line}: {reason}")]
    Scenario { line: usize, reason: String },

    #[error("invalid fault spec: {0}")]
    Fault(String),

    #[error("truncated or malformed model at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("unsupported model format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_slice(self, k: usize) -> Error {
        match self {
            e @ Error::AtSlice { .. } | e @ Error::DegenerateSlice { .. } => e,
            e => Error::AtSlice {
                k,
                source: Box::new(e),
            },
        }
    }
}

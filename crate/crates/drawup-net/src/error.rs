use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced anywhere in the drawup-network pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed CSV row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("duplicate observation for entity `{entity}` on {date}")]
    DuplicateObservation { entity: String, date: NaiveDate },

    #[error("input contains no observations")]
    EmptyInput,

    #[error("entity `{0}` has no observations")]
    NeverObserved(String),

    #[error("period `{label}` [{start}, {end}) does not intersect the panel calendar")]
    EmptyPeriod {
        label: String,
        start: NaiveDate,
        end: NaiveDate,
    },

    #[error("invalid period `{label}`: start {start} is not before end {end}")]
    InvalidPeriod {
        label: String,
        start: NaiveDate,
        end: NaiveDate,
    },

    #[error("series has {len} days, need more than the {window}-day window")]
    SeriesTooShort { len: usize, window: usize },

    #[error("day {t} has fewer than {window} days of history")]
    InsufficientHistory { t: usize, window: usize },

    #[error("event vectors have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no event vectors supplied")]
    EmptyVectorSet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("no centrality profile for node `{0}`")]
    MissingCentrality(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(String),
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

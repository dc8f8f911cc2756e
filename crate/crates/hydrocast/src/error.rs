//! Error type shared across the crate.

use chrono::NaiveDate;
use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors that can occur in any stage of the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be parsed.
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    /// The (date, subbasin) grid has a missing cell.
    #[error("incomplete grid: missing row for date {date}, subbasin {subbasin}")]
    IncompleteGrid { date: NaiveDate, subbasin: u32 },

    /// The same (date, subbasin) appeared twice in an input file.
    #[error("duplicate key: date {date}, subbasin {subbasin} appears more than once")]
    DuplicateKey { date: NaiveDate, subbasin: u32 },

    /// Series construction violated a structural invariant.
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    /// A split date falls outside the series range.
    #[error("split out of range: {0}")]
    SplitOutOfRange(String),

    /// Lookup of a subbasin id that is not present.
    #[error("unknown subbasin {0}")]
    UnknownSubbasin(u32),

    /// Lookup of a feature name that is not present.
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    /// Day-of-year index outside 1..=366.
    #[error("day of year {0} out of range 1..=366")]
    DayOfYearOutOfRange(u16),

    /// Standardization statistics could not be fitted.
    #[error("cannot fit statistics: {0}")]
    StatsFit(String),

    /// Reduction window/stride combination is invalid.
    #[error("invalid reduction config: {0}")]
    InvalidReduction(String),

    /// The series has fewer days than one reduction window.
    #[error("series too short: reduction window is {window} days but series has {days}")]
    SeriesTooShort { window: usize, days: usize },

    /// Window specification violated an invariant.
    #[error("invalid window spec: {0}")]
    InvalidWindowSpec(String),

    /// No reduced channel is long enough to yield a window sample.
    #[error(
        "insufficient data: need a channel with at least {required} reduced timesteps, \
         longest available is {longest}"
    )]
    InsufficientData { required: usize, longest: usize },

    /// Generic invalid configuration value.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Tensor or matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A non-finite value appeared where a finite one is required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    /// NRMSE is undefined because the truth sequence has zero range.
    #[error("degenerate range: truth sequence has max == min")]
    DegenerateRange,

    /// Two sequences that must have equal length do not.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// An autoregressive fit was given too little history.
    #[error("history too short: need at least {required} observations, got {actual}")]
    HistoryTooShort { required: usize, actual: usize },

    /// The normal equations of an autoregressive fit are singular.
    #[error("singular normal equations in autoregressive fit")]
    SingularFit,

    /// A response feature is required among the predictors but is missing.
    #[error("response '{0}' is not among the predictor features")]
    ResponseNotInPredictors(String),

    /// Predictions cannot be aligned with their provenance.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A serialized model or stats file does not match the expected format.
    #[error("format error in {path}: {message}")]
    FileFormat { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Wraps an error with the pipeline stage it occurred in.
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The stage name if this error was wrapped by [`Error::in_stage`].
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

/// Extension trait to tag a `Result` with a pipeline stage name.
pub(crate) trait StageExt<T> {
    fn in_stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn in_stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}

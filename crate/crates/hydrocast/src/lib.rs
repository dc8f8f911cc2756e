//! Spatio-temporal forecasting for watershed time series.
//!
//! The pipeline, end to end:
//!
//! 1. [`series`] — ingest daily per-subbasin records into a dense
//!    `T x S x F` tensor and split it chronologically.
//! 2. [`standardize`] — fit per day-of-year, per-subbasin, per-feature mean
//!    and std on the training split; standardized values double as the
//!    z-scores used for extreme-event classification.
//! 3. [`reduce`] — coarsen the daily series into `w`-day windows, producing
//!    `w/s` offset channels so sliding-window contiguity survives.
//! 4. [`window`] — extract pooled (input, output) window samples from each
//!    channel.
//! 5. [`nn`] — train a from-scratch bidirectional LSTM with hand-written
//!    backpropagation through time; [`baselines`] holds the naive
//!    last-timestep and AR forecasters for comparison.
//! 6. [`eval`] — NRMSE in original units and z-score event classification.
//!
//! [`experiment`] wires the stages into transductive runs (train and test on
//! one subbasin), inductive runs (train on one, test on another) and the
//! reduction parameter sweep; [`synth`] generates deterministic
//! watershed-like data so everything is runnable without real records.

pub mod baselines;
pub mod calendar;
pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod reduce;
pub mod series;
pub mod standardize;
pub mod synth;
pub mod window;

pub use error::{Error, Result};

pub use baselines::{arima_fit, arima_forecast, naive_forecast, ArimaModel, ArimaOrder};
pub use eval::{classify_event, evaluate_run, nrmse, EvalReport, EventClass, Sign};
pub use experiment::{
    run_inductive, run_reduction_sweep, run_transductive, DataSource, ExperimentConfig,
    ModelChoice, OutputPaths, RunOutcome,
};
pub use nn::{mse_loss, xavier_init, BlstmConfig, BlstmModel, Checkpoint, TrainConfig};
pub use reduce::{operation_ratio, reduce, OperationRatio, ReductionConfig};
pub use series::{ingest_csv, CsvSchema, DateSplit, SpatioTemporalSeries, SplitSeries};
pub use standardize::{fit_stats, standardize, StandardizationStats};
pub use synth::{generate, FeatureSynth, SynthConfig};
pub use window::{extract_windows, WindowDataset, WindowSpec};

/// The five canonical feature names emitted by the synthetic generator, in
/// tensor order.
pub const CANONICAL_FEATURES: [&str; 5] =
    ["precipitation", "temp_min", "temp_max", "soil_water", "stream_flow"];

/// Default predictor set: the synthetic date feature plus all five
/// observed features (P = 6).
pub fn default_predictors() -> Vec<String> {
    let mut names = vec![window::DATE_FEATURE.to_string()];
    names.extend(CANONICAL_FEATURES.iter().map(|s| s.to_string()));
    names
}

/// Default response set: the two hydrological features (R = 2).
pub fn default_responses() -> Vec<String> {
    vec!["soil_water".to_string(), "stream_flow".to_string()]
}

//! End-to-end experiment orchestration: wires ingestion/synthesis,
//! standardization, reduction, windowing, model fitting and evaluation into
//! transductive and inductive runs plus the reduction parameter sweep.
//!
//! Every error surfaced from a run names the pipeline stage it occurred in.

use std::path::{Path, PathBuf};

use crate::baselines::{arima_fit, arima_forecast, naive_forecast, ArimaOrder};
use crate::error::{Error, Result, StageExt};
use crate::eval::{evaluate_run, write_timestep_csv, EvalReport};
use crate::nn::{
    train, BlstmConfig, BlstmModel, Checkpoint, EpochStats, TrainConfig, TrainOutcome,
};
use crate::reduce::{operation_ratio, reduce, OperationRatio, ReductionConfig};
use crate::series::{ingest_csv, CsvSchema, DateSplit, SpatioTemporalSeries};
use crate::standardize::{fit_stats, standardize, StandardizationStats};
use crate::synth::{generate, SynthConfig};
use crate::window::{extract_windows, WindowDataset, WindowSpec};

/// Where the raw daily series comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Csv { path: PathBuf, schema: CsvSchema },
    Synthetic(SynthConfig),
}

/// Which forecaster to run.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Naive,
    Arima(ArimaOrder),
    Blstm { hidden: usize },
}

impl ModelChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ModelChoice::Naive => "naive",
            ModelChoice::Arima(_) => "arima",
            ModelChoice::Blstm { .. } => "blstm",
        }
    }
}

/// Output file destinations; everything is optional.
#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    /// Trained-model checkpoint.
    pub checkpoint: Option<PathBuf>,
    /// Fitted standardization statistics.
    pub stats: Option<PathBuf>,
    /// Report base path: `<base>.txt`, `<base>.csv` and
    /// `<base>_timesteps.csv` are written next to each other.
    pub report: Option<PathBuf>,
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub reduction: ReductionConfig,
    pub window: WindowSpec,
    pub model: ModelChoice,
    pub train: TrainConfig,
    pub split: DateSplit,
    pub train_subbasin: u32,
    pub eval_subbasins: Vec<u32>,
    /// Reuse previously fitted statistics when they cover the subbasin at
    /// hand; refit from the training period otherwise.
    pub stats_in: Option<PathBuf>,
    /// Skip training and evaluate this checkpoint instead.
    pub checkpoint_in: Option<PathBuf>,
    pub outputs: OutputPaths,
}

/// Result of one evaluated run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    /// Subbasin the report was evaluated on.
    pub eval_subbasin: u32,
    /// Window samples in the training split.
    pub train_samples: usize,
    /// Per-epoch losses (recurrent model only).
    pub history: Option<Vec<EpochStats>>,
    pub best_epoch: Option<usize>,
    pub best_val_mse: Option<f64>,
}

/// Load or synthesize the raw daily series.
pub fn load_series(config: &ExperimentConfig) -> Result<SpatioTemporalSeries> {
    match &config.data {
        DataSource::Csv { path, schema } => ingest_csv(path, schema).in_stage("ingest"),
        DataSource::Synthetic(synth) => generate(synth).in_stage("synthesis"),
    }
}

/// One subbasin's fully prepared pipeline data.
struct Prepared {
    stats: StandardizationStats,
    train: WindowDataset,
    val: WindowDataset,
    test: WindowDataset,
}

fn prepare_subbasin(
    series: &SpatioTemporalSeries,
    subbasin: u32,
    config: &ExperimentConfig,
) -> Result<Prepared> {
    let slice = series.select_subbasin(subbasin).in_stage("selection")?;
    let parts = slice.split_by_date(&config.split).in_stage("split")?;

    // Statistics come from the subbasin's own training period (or from a
    // stats file that already covers it).
    let stats = match &config.stats_in {
        Some(path) if stats_cover(path, subbasin)? => {
            StandardizationStats::load(path).in_stage("standardization")?
        }
        _ => fit_stats(&parts.train).in_stage("standardization")?,
    };

    let train_z = standardize(&parts.train, &stats).in_stage("standardization")?;
    let val_z = standardize(&parts.val, &stats).in_stage("standardization")?;
    let test_z = standardize(&parts.test, &stats).in_stage("standardization")?;

    let window = |z: &SpatioTemporalSeries| -> Result<WindowDataset> {
        let channels = reduce(z, &config.reduction).in_stage("reduction")?;
        extract_windows(&channels, &config.window).in_stage("windowing")
    };
    Ok(Prepared { train: window(&train_z)?, val: window(&val_z)?, test: window(&test_z)?, stats })
}

fn stats_cover(path: &Path, subbasin: u32) -> Result<bool> {
    if !path.exists() {
        return Ok(false);
    }
    let stats = StandardizationStats::load(path).in_stage("standardization")?;
    Ok(stats.subbasin_ids().binary_search(&subbasin).is_ok())
}

/// A fitted forecaster ready to predict windows.
pub enum TrainedModel {
    Naive,
    Arima(ArimaOrder),
    Blstm(BlstmModel),
}

fn fit_model(
    config: &ExperimentConfig,
    train_ds: &WindowDataset,
    val_ds: &WindowDataset,
) -> Result<(TrainedModel, Option<TrainOutcome>)> {
    match &config.model {
        ModelChoice::Naive => Ok((TrainedModel::Naive, None)),
        ModelChoice::Arima(order) => {
            let order = arima_window_order(*order, config.window.input_steps)?;
            Ok((TrainedModel::Arima(order), None))
        }
        ModelChoice::Blstm { hidden } => {
            if let Some(path) = &config.checkpoint_in {
                let ckpt = Checkpoint::load(path).in_stage("training")?;
                check_model_shape(&ckpt.model, &config.window).in_stage("training")?;
                return Ok((TrainedModel::Blstm(ckpt.model), None));
            }
            let model_config = BlstmConfig {
                num_predictors: config.window.num_predictors(),
                hidden: *hidden,
                input_steps: config.window.input_steps,
                output_steps: config.window.output_steps,
                num_responses: config.window.num_responses(),
            };
            let model =
                BlstmModel::init(model_config, config.train.seed).in_stage("training")?;
            let outcome = train(model, train_ds, val_ds, &config.train).in_stage("training")?;
            Ok((TrainedModel::Blstm(outcome.model.clone()), Some(outcome)))
        }
    }
}

fn check_model_shape(model: &BlstmModel, window: &WindowSpec) -> Result<()> {
    let c = &model.config;
    if c.num_predictors != window.num_predictors()
        || c.input_steps != window.input_steps
        || c.output_steps != window.output_steps
        || c.num_responses != window.num_responses()
    {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint shape (P={}, I={}, O={}, R={}) does not match the window spec \
             (P={}, I={}, O={}, R={})",
            c.num_predictors,
            c.input_steps,
            c.output_steps,
            c.num_responses,
            window.num_predictors(),
            window.input_steps,
            window.output_steps,
            window.num_responses()
        )));
    }
    Ok(())
}

/// Shrink the AR order so a per-window fit on `input_steps` observations is
/// possible; error when even p = 1 does not fit.
fn arima_window_order(order: ArimaOrder, input_steps: usize) -> Result<ArimaOrder> {
    if input_steps >= order.min_history() {
        return Ok(order);
    }
    let p_fit = input_steps.saturating_sub(order.d + 10);
    if p_fit >= 1 {
        log::warn!(
            "AR order p={} needs {} observations but windows have {input_steps}; using p={p_fit}",
            order.p,
            order.min_history()
        );
        return ArimaOrder::new(p_fit, order.d, 0);
    }
    Err(Error::HistoryTooShort {
        required: ArimaOrder::new(1, order.d, 0)?.min_history(),
        actual: input_steps,
    })
}

/// Predict every window of a dataset, producing flat `N x O x R` z-space
/// predictions.
pub fn predict_windows(
    model: &TrainedModel,
    dataset: &WindowDataset,
    spec: &WindowSpec,
) -> Result<Vec<f64>> {
    match model {
        TrainedModel::Blstm(model) => model.predict_dataset(dataset),
        TrainedModel::Naive => {
            let mut out = Vec::with_capacity(
                dataset.len() * spec.output_steps * spec.num_responses(),
            );
            for n in 0..dataset.len() {
                out.extend(naive_forecast(dataset.input(n), spec)?);
            }
            Ok(out)
        }
        TrainedModel::Arima(order) => {
            let p = spec.num_predictors();
            let r = spec.num_responses();
            let mut response_cols = Vec::with_capacity(r);
            for response in &spec.responses {
                let col = spec
                    .predictors
                    .iter()
                    .position(|name| name == response)
                    .ok_or_else(|| Error::ResponseNotInPredictors(response.clone()))?;
                response_cols.push(col);
            }
            let o = spec.output_steps;
            let mut out = vec![0.0; dataset.len() * o * r];
            let mut history = vec![0.0; spec.input_steps];
            for n in 0..dataset.len() {
                let window = dataset.input(n);
                for (resp, &col) in response_cols.iter().enumerate() {
                    for (step, slot) in history.iter_mut().enumerate() {
                        *slot = window[step * p + col];
                    }
                    let model = arima_fit(&history, *order)?;
                    let forecast = arima_forecast(&model, &history, o)?;
                    for (j, value) in forecast.into_iter().enumerate() {
                        out[(n * o + j) * r + resp] = value;
                    }
                }
            }
            Ok(out)
        }
    }
}

fn write_outputs(
    config: &ExperimentConfig,
    prepared: &Prepared,
    outcome: &Option<TrainOutcome>,
    predictions: &[f64],
    report: &EvalReport,
    report_suffix: Option<u32>,
) -> Result<()> {
    if let (Some(path), Some(out)) = (&config.outputs.checkpoint, outcome) {
        Checkpoint { model: out.model.clone(), epoch: out.best_epoch, val_mse: out.best_val_mse }
            .save(path)
            .in_stage("output")?;
    }
    if let Some(path) = &config.outputs.stats {
        prepared.stats.save(path).in_stage("output")?;
    }
    if let Some(base) = &config.outputs.report {
        let base = match report_suffix {
            Some(subbasin) => format!("{}_sb{subbasin}", base.display()),
            None => base.display().to_string(),
        };
        let write = || -> Result<()> {
            let text = std::fs::File::create(format!("{base}.txt"))?;
            report.write_text(std::io::BufWriter::new(text))?;
            let csv = std::fs::File::create(format!("{base}.csv"))?;
            report.write_csv(std::io::BufWriter::new(csv))?;
            let steps = std::fs::File::create(format!("{base}_timesteps.csv"))?;
            write_timestep_csv(
                &prepared.test,
                predictions,
                &prepared.stats,
                std::io::BufWriter::new(steps),
            )?;
            Ok(())
        };
        write().in_stage("output")?;
    }
    Ok(())
}

fn run_on_prepared(
    config: &ExperimentConfig,
    prepared: &Prepared,
    eval_subbasin: u32,
    report_suffix: Option<u32>,
    pretrained: Option<&(TrainedModel, Option<TrainOutcome>)>,
) -> Result<RunOutcome> {
    let fitted;
    let (model, outcome) = match pretrained {
        Some(pair) => pair,
        None => {
            fitted = fit_model(config, &prepared.train, &prepared.val)?;
            &fitted
        }
    };
    let predictions =
        predict_windows(model, &prepared.test, &config.window).in_stage("prediction")?;
    let report =
        evaluate_run(&prepared.test, &predictions, &prepared.stats).in_stage("evaluation")?;
    write_outputs(config, prepared, outcome, &predictions, &report, report_suffix)?;
    Ok(RunOutcome {
        report,
        eval_subbasin,
        train_samples: prepared.train.len(),
        history: outcome.as_ref().map(|o| o.history.clone()),
        best_epoch: outcome.as_ref().map(|o| o.best_epoch),
        best_val_mse: outcome.as_ref().map(|o| o.best_val_mse),
    })
}

/// Train and evaluate on the same subbasin.
pub fn run_transductive(config: &ExperimentConfig) -> Result<RunOutcome> {
    let series = load_series(config)?;
    run_transductive_on(&series, config)
}

fn run_transductive_on(
    series: &SpatioTemporalSeries,
    config: &ExperimentConfig,
) -> Result<RunOutcome> {
    let prepared = prepare_subbasin(series, config.train_subbasin, config)?;
    run_on_prepared(config, &prepared, config.train_subbasin, None, None)
}

/// Train on `train_subbasin`, evaluate on each of `eval_subbasins`.
///
/// The model transfers unchanged; standardization is local, fitted on each
/// evaluation subbasin's own training-period data, which is what makes a
/// z-space model transferable across subbasins with different yields.
pub fn run_inductive(config: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    if config.eval_subbasins.is_empty() {
        return Err(Error::InvalidConfig("no evaluation subbasins given".into()));
    }
    for &subbasin in &config.eval_subbasins {
        if subbasin == config.train_subbasin {
            return Err(Error::InvalidConfig(format!(
                "evaluation subbasin {subbasin} equals the training subbasin"
            )));
        }
    }
    let series = load_series(config)?;
    let train_prepared = prepare_subbasin(&series, config.train_subbasin, config)?;
    let fitted = fit_model(config, &train_prepared.train, &train_prepared.val)?;

    let mut outcomes = Vec::with_capacity(config.eval_subbasins.len());
    for &subbasin in &config.eval_subbasins {
        let prepared = prepare_subbasin(&series, subbasin, config)?;
        let suffix = if config.eval_subbasins.len() > 1 { Some(subbasin) } else { None };
        let mut outcome = run_on_prepared(config, &prepared, subbasin, suffix, Some(&fitted))?;
        outcome.train_samples = train_prepared.train.len();
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// One row of the reduction parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub window: usize,
    pub stride: usize,
    pub input_steps: usize,
    pub output_steps: usize,
    pub train_samples: usize,
    pub ratio: OperationRatio,
    pub nrmse: Vec<(String, f64)>,
}

/// Sweep results, one row per (w, s) pair.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_text<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let responses: Vec<&str> = self
            .rows
            .first()
            .map(|r| r.nrmse.iter().map(|(n, _)| n.as_str()).collect())
            .unwrap_or_default();
        write!(out, "{:>4} {:>4} {:>10} {:>9} {:>13}", "w", "s", "timesteps", "ratio", "samples")?;
        for name in &responses {
            write!(out, " {:>12}", format!("nrmse[{name}]"))?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(
                out,
                "{:>4} {:>4} {:>10} {:>9} {:>13}",
                row.window,
                row.stride,
                format!("{}->{}", row.input_steps, row.output_steps),
                row.ratio.to_string(),
                row.train_samples
            )?;
            for (_, value) in &row.nrmse {
                write!(out, " {value:>12.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Run the experiment once per (w, s) pair, keeping the daily input/output
/// coverage fixed: the window counts `I` and `O` are rescaled so that
/// `I * w` and `O * w` stay at their configured day totals.
pub fn run_reduction_sweep(
    config: &ExperimentConfig,
    pairs: &[(usize, usize)],
) -> Result<SweepTable> {
    let input_days = config.window.input_steps * config.reduction.window;
    let output_days = config.window.output_steps * config.reduction.window;
    let series = load_series(config)?;

    let mut rows = Vec::with_capacity(pairs.len());
    for &(w, s) in pairs {
        let reduction = ReductionConfig::new(w, s)?;
        if input_days % w != 0 || output_days % w != 0 {
            return Err(Error::InvalidConfig(format!(
                "window {w} does not divide the {input_days}/{output_days}-day coverage"
            )));
        }
        let window = WindowSpec::new(
            input_days / w,
            output_days / w,
            config.window.predictors.clone(),
            config.window.responses.clone(),
        )?;
        let cell = ExperimentConfig {
            reduction,
            window,
            outputs: OutputPaths::default(),
            ..config.clone()
        };
        let outcome = run_transductive_on(&series, &cell)?;
        rows.push(SweepRow {
            window: w,
            stride: s,
            input_steps: cell.window.input_steps,
            output_steps: cell.window.output_steps,
            train_samples: outcome.train_samples,
            ratio: operation_ratio(w, s)?,
            nrmse: outcome.report.response_nrmse.clone(),
        });
    }
    Ok(SweepTable { rows })
}

//! Command line interface for the hydrocast forecasting library.
//!
//! Subcommands: `synth` (generate data), `ingest` (validate/summarize),
//! `train` (transductive fit + evaluation), `evaluate` (transductive or
//! inductive evaluation, optionally from a checkpoint), `sweep` (reduction
//! parameter table). Flags override config-file entries, which override
//! defaults.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hydrocast::baselines::ArimaOrder;
use hydrocast::config::KeyValues;
use hydrocast::experiment::{
    load_series, run_inductive, run_reduction_sweep, run_transductive, DataSource,
    ExperimentConfig, ModelChoice, OutputPaths, RunOutcome,
};
use hydrocast::nn::TrainConfig;
use hydrocast::reduce::ReductionConfig;
use hydrocast::series::{CsvSchema, DateSplit};
use hydrocast::synth::SynthConfig;
use hydrocast::window::WindowSpec;

#[derive(Parser)]
#[command(name = "hydrocast", version, about = "Watershed time-series forecasting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-subbasin daily series and write it as CSV.
    Synth(SynthArgs),
    /// Validate a CSV file and print its tensor dimensions.
    Ingest(IngestArgs),
    /// Train on one subbasin and evaluate on its own test split.
    Train(RunArgs),
    /// Evaluate a model; with --eval-subbasin, tests transfer to other
    /// subbasins (standardized with their own training-period statistics).
    Evaluate(RunArgs),
    /// Re-run the experiment across (window, stride) pairs and print the
    /// resulting table.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Key-value config file with generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_days: Option<usize>,
    #[arg(long)]
    n_subbasins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// First date of the series (YYYY-MM-DD).
    #[arg(long)]
    start_date: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    /// Input CSV path.
    #[arg(long)]
    data: PathBuf,
    /// Column renames, e.g. `DATE=date,BASIN=subbasin`.
    #[arg(long)]
    schema: Option<String>,
    /// Re-export the validated series to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Key-value config file; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV path. `synth:` plus a config file path generates data on
    /// the fly instead.
    #[arg(long)]
    data: Option<String>,
    /// Column renames applied to the CSV header.
    #[arg(long)]
    schema: Option<String>,
    /// Subbasin the model is fitted on.
    #[arg(long)]
    train_subbasin: Option<u32>,
    /// Subbasin(s) to evaluate on (repeat or comma-separate for several).
    #[arg(long, value_delimiter = ',')]
    eval_subbasin: Vec<u32>,
    /// Reduction window size in days.
    #[arg(short = 'w', long)]
    window: Option<usize>,
    /// Reduction stride in days (must divide the window).
    #[arg(short = 's', long)]
    stride: Option<usize>,
    /// Input timesteps per window sample.
    #[arg(long)]
    input_steps: Option<usize>,
    /// Output timesteps per window sample.
    #[arg(long)]
    output_steps: Option<usize>,
    /// Comma-separated predictor features (`date` is the synthetic one).
    #[arg(long, value_delimiter = ',')]
    predictors: Option<Vec<String>>,
    /// Comma-separated response features.
    #[arg(long, value_delimiter = ',')]
    responses: Option<Vec<String>>,
    /// Forecaster: naive, arima or blstm.
    #[arg(long)]
    model: Option<String>,
    /// ARIMA order as `p,d,q` (q must be 0).
    #[arg(long)]
    arima_order: Option<String>,
    /// Hidden units per direction.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Inverse-time learning-rate decay constant.
    #[arg(long)]
    lr_decay: Option<f64>,
    /// L2 regularization strength (weights only).
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Last training date (YYYY-MM-DD); default splits 80/10/10 by count.
    #[arg(long)]
    train_end: Option<String>,
    /// Last validation date (YYYY-MM-DD).
    #[arg(long)]
    val_end: Option<String>,
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
    #[arg(long)]
    checkpoint_in: Option<PathBuf>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
    #[arg(long)]
    stats_in: Option<PathBuf>,
    /// Report base path; writes <base>.txt, <base>.csv and
    /// <base>_timesteps.csv.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// (window, stride) pairs as `w:s`, comma-separated.
    #[arg(long, default_value = "1:1,7:1,7:7,14:1,14:14,28:1,28:28")]
    pairs: String,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Ingest(args) => ingest(args),
        Command::Train(args) => {
            let config = resolve(&args)?;
            let outcome = run_transductive(&config).context("training run failed")?;
            print_outcome(&outcome, "transductive")?;
            Ok(())
        }
        Command::Evaluate(args) => evaluate(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut config = SynthConfig::default();
    if let Some(path) = &args.config {
        let kv =
            KeyValues::load(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_key_values(&kv)?;
    }
    if let Some(n) = args.n_days {
        config.n_days = n;
    }
    if let Some(n) = args.n_subbasins {
        config.n_subbasins = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(date) = &args.start_date {
        config.start_date = parse_date(date)?;
    }
    let series = hydrocast::synth::generate(&config)?;
    series.write_csv_file(&args.out)?;
    println!(
        "wrote {}: {} days x {} subbasins x {} features ({} .. {})",
        args.out.display(),
        series.num_days(),
        series.num_subbasins(),
        series.num_features(),
        series.start_date(),
        series.end_date()
    );
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let schema = match &args.schema {
        Some(spec) => CsvSchema::parse(spec)?,
        None => CsvSchema::default(),
    };
    let series = hydrocast::series::ingest_csv(&args.data, &schema)?;
    println!(
        "{}: {} days x {} subbasins x {} features",
        args.data.display(),
        series.num_days(),
        series.num_subbasins(),
        series.num_features()
    );
    println!("dates     {} .. {}", series.start_date(), series.end_date());
    println!("features  {}", series.feature_names().join(", "));
    let ids = series.subbasin_ids();
    let shown: Vec<String> = ids.iter().take(8).map(|i| i.to_string()).collect();
    let ellipsis = if ids.len() > 8 { ", ..." } else { "" };
    println!("subbasins {}{}", shown.join(", "), ellipsis);
    if let Some(out) = &args.out {
        series.write_csv_file(out)?;
        println!("re-exported to {}", out.display());
    }
    Ok(())
}

fn evaluate(args: RunArgs) -> Result<()> {
    let config = resolve(&args)?;
    let inductive = config
        .eval_subbasins
        .iter()
        .any(|&subbasin| subbasin != config.train_subbasin);
    if inductive {
        let outcomes = run_inductive(&config).context("inductive evaluation failed")?;
        for outcome in &outcomes {
            print_outcome(outcome, "inductive")?;
        }
    } else {
        let outcome = run_transductive(&config).context("evaluation failed")?;
        print_outcome(&outcome, "transductive")?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let config = resolve(&args.run)?;
    let mut pairs = Vec::new();
    for token in args.pairs.split(',').filter(|t| !t.is_empty()) {
        let (w, s) = token
            .split_once(':')
            .with_context(|| format!("pair '{token}' is not w:s"))?;
        pairs.push((w.trim().parse::<usize>()?, s.trim().parse::<usize>()?));
    }
    let table = run_reduction_sweep(&config, &pairs).context("sweep failed")?;
    let mut out = Vec::new();
    table.write_text(&mut out)?;
    print!("{}", String::from_utf8(out)?);
    Ok(())
}

fn parse_date(text: &str) -> Result<chrono::NaiveDate> {
    chrono::NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d")
        .with_context(|| format!("bad date '{text}' (expected YYYY-MM-DD)"))
}

/// Merge defaults, config-file entries and command-line flags into the full
/// experiment configuration.
fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let kv = match &args.config {
        Some(path) => {
            KeyValues::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => KeyValues::default(),
    };

    let data_spec = args
        .data
        .clone()
        .or_else(|| kv.get("data").map(str::to_string))
        .context("no input data: pass --data or set `data` in the config file")?;
    let data = if let Some(synth_path) = data_spec.strip_prefix("synth:") {
        let mut synth = SynthConfig::default();
        let synth_kv =
            KeyValues::load(synth_path).with_context(|| format!("reading {synth_path}"))?;
        synth.apply_key_values(&synth_kv)?;
        DataSource::Synthetic(synth)
    } else {
        let schema_spec = args.schema.clone().or_else(|| kv.get("schema").map(str::to_string));
        let schema = match schema_spec {
            Some(spec) => CsvSchema::parse(&spec)?,
            None => CsvSchema::default(),
        };
        DataSource::Csv { path: PathBuf::from(data_spec), schema }
    };

    let window = args.window.or(kv.get_parsed("window")?).unwrap_or(7);
    let stride = args.stride.or(kv.get_parsed("stride")?).unwrap_or(1);
    let reduction = ReductionConfig::new(window, stride)?;

    let predictors = args
        .predictors
        .clone()
        .or_else(|| kv.get("predictors").map(split_names))
        .unwrap_or_else(hydrocast::default_predictors);
    let responses = args
        .responses
        .clone()
        .or_else(|| kv.get("responses").map(split_names))
        .unwrap_or_else(hydrocast::default_responses);
    let window_spec = WindowSpec::new(
        args.input_steps.or(kv.get_parsed("input_steps")?).unwrap_or(12),
        args.output_steps.or(kv.get_parsed("output_steps")?).unwrap_or(4),
        predictors,
        responses,
    )?;

    let model_name = args
        .model
        .clone()
        .or_else(|| kv.get("model").map(str::to_string))
        .unwrap_or_else(|| "blstm".to_string());
    let order_spec =
        args.arima_order.clone().or_else(|| kv.get("arima_order").map(str::to_string));
    let hidden = args.hidden.or(kv.get_parsed("hidden")?).unwrap_or(256);
    let model = match model_name.as_str() {
        "naive" => ModelChoice::Naive,
        "arima" => ModelChoice::Arima(match order_spec {
            Some(spec) => ArimaOrder::parse(&spec)?,
            None => ArimaOrder::default(),
        }),
        "blstm" => ModelChoice::Blstm { hidden },
        other => bail!("unknown model '{other}' (expected naive, arima or blstm)"),
    };

    let defaults = TrainConfig::default();
    let train = TrainConfig {
        epochs: args.epochs.or(kv.get_parsed("epochs")?).unwrap_or(defaults.epochs),
        batch_size: args.batch.or(kv.get_parsed("batch")?).unwrap_or(defaults.batch_size),
        learning_rate: args.lr.or(kv.get_parsed("lr")?).unwrap_or(defaults.learning_rate),
        lr_decay: args.lr_decay.or(kv.get_parsed("lr_decay")?).unwrap_or(defaults.lr_decay),
        l2: args.l2.or(kv.get_parsed("l2")?).unwrap_or(defaults.l2),
        seed: args.seed.or(kv.get_parsed("seed")?).unwrap_or(defaults.seed),
    };

    let train_subbasin =
        args.train_subbasin.or(kv.get_parsed("train_subbasin")?).unwrap_or(1);
    let mut eval_subbasins = args.eval_subbasin.clone();
    if eval_subbasins.is_empty() {
        if let Some(list) = kv.get("eval_subbasins") {
            for token in list.split(',').filter(|t| !t.is_empty()) {
                eval_subbasins.push(token.trim().parse()?);
            }
        }
    }

    let train_end = args.train_end.clone().or_else(|| kv.get("train_end").map(str::to_string));
    let val_end = args.val_end.clone().or_else(|| kv.get("val_end").map(str::to_string));

    let mut config = ExperimentConfig {
        data,
        reduction,
        window: window_spec,
        model,
        train,
        // Placeholder; replaced below once the data range is known.
        split: DateSplit::new(chrono::NaiveDate::MIN, chrono::NaiveDate::MAX),
        train_subbasin,
        eval_subbasins,
        stats_in: args.stats_in.clone().or_else(|| kv.get("stats_in").map(PathBuf::from)),
        checkpoint_in: args
            .checkpoint_in
            .clone()
            .or_else(|| kv.get("checkpoint_in").map(PathBuf::from)),
        outputs: OutputPaths {
            checkpoint: args
                .checkpoint_out
                .clone()
                .or_else(|| kv.get("checkpoint_out").map(PathBuf::from)),
            stats: args.stats_out.clone().or_else(|| kv.get("stats_out").map(PathBuf::from)),
            report: args
                .report_out
                .clone()
                .or_else(|| kv.get("report_out").map(PathBuf::from)),
        },
    };

    config.split = match (train_end, val_end) {
        (Some(t), Some(v)) => DateSplit::new(parse_date(&t)?, parse_date(&v)?),
        (None, None) => {
            let series = load_series(&config)?;
            series.fractional_split(0.8, 0.1)?
        }
        _ => bail!("pass both --train-end and --val-end, or neither"),
    };
    Ok(config)
}

fn split_names(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn print_outcome(outcome: &RunOutcome, setting: &str) -> Result<()> {
    println!(
        "== {setting} evaluation, subbasin {} ({} training samples) ==",
        outcome.eval_subbasin, outcome.train_samples
    );
    if let (Some(epoch), Some(val)) = (outcome.best_epoch, outcome.best_val_mse) {
        println!("best validation mse {val:.6} at epoch {epoch}");
    }
    let mut buf = Vec::new();
    outcome.report.write_text(&mut buf)?;
    println!("{}", String::from_utf8(buf)?);
    Ok(())
}

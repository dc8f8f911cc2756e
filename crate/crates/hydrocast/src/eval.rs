//! Forecast evaluation: normalized RMSE in original units and z-score
//! extreme-event classification with confusion reporting.
//!
//! The z-score of a timestep is its standardized value under the fitted
//! day-of-year/subbasin statistics, so model-space predictions and targets
//! are already z-scores; original units are recovered by destandardizing at
//! each output step's covering start date.

use std::io::Write;

use crate::error::{Error, Result};
use crate::standardize::StandardizationStats;
use crate::window::WindowDataset;

/// Side of the distribution a non-normal event falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    /// Below the seasonal mean (drought-like).
    Low,
    /// Above the seasonal mean (flood-like).
    High,
}

/// Severity classification of a z-score.
///
/// The intervals partition the real line: Normal `|z| <= 1`, Moderate
/// `1 < |z| <= 1.5`, Severe `1.5 < |z| <= 2`, Extreme `|z| > 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventClass {
    Normal,
    Moderate(Sign),
    Severe(Sign),
    Extreme(Sign),
}

impl EventClass {
    /// Severity bucket with the sign collapsed: 0 normal .. 3 extreme.
    pub fn severity_index(&self) -> usize {
        match self {
            EventClass::Normal => 0,
            EventClass::Moderate(_) => 1,
            EventClass::Severe(_) => 2,
            EventClass::Extreme(_) => 3,
        }
    }

    /// Sign-resolved bucket: 0 extreme-low .. 3 normal .. 6 extreme-high.
    pub fn sign_resolved_index(&self) -> usize {
        match self {
            EventClass::Normal => 3,
            EventClass::Moderate(Sign::Low) => 2,
            EventClass::Severe(Sign::Low) => 1,
            EventClass::Extreme(Sign::Low) => 0,
            EventClass::Moderate(Sign::High) => 4,
            EventClass::Severe(Sign::High) => 5,
            EventClass::Extreme(Sign::High) => 6,
        }
    }
}

impl std::fmt::Display for EventClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EventClass::Normal => "normal",
            EventClass::Moderate(Sign::Low) => "moderate_low",
            EventClass::Moderate(Sign::High) => "moderate_high",
            EventClass::Severe(Sign::Low) => "severe_low",
            EventClass::Severe(Sign::High) => "severe_high",
            EventClass::Extreme(Sign::Low) => "extreme_low",
            EventClass::Extreme(Sign::High) => "extreme_high",
        };
        f.write_str(name)
    }
}

/// Severity bucket names in severity order.
pub const SEVERITY_NAMES: [&str; 4] = ["normal", "moderate", "severe", "extreme"];

/// Sign-resolved bucket names in [`EventClass::sign_resolved_index`] order.
pub const SIGN_RESOLVED_NAMES: [&str; 7] = [
    "extreme_low",
    "severe_low",
    "moderate_low",
    "normal",
    "moderate_high",
    "severe_high",
    "extreme_high",
];

/// Classify a z-score into its severity interval; boundary values belong to
/// the less extreme class (z = 1 is Normal, z = -1.5 is Moderate, z = 2 is
/// Severe).
pub fn classify_event(z: f64) -> Result<EventClass> {
    if !z.is_finite() {
        return Err(Error::NonFinite("z-score".into()));
    }
    let sign = if z < 0.0 { Sign::Low } else { Sign::High };
    let magnitude = z.abs();
    Ok(if magnitude <= 1.0 {
        EventClass::Normal
    } else if magnitude <= 1.5 {
        EventClass::Moderate(sign)
    } else if magnitude <= 2.0 {
        EventClass::Severe(sign)
    } else {
        EventClass::Extreme(sign)
    })
}

/// Normalized root mean squared error: `RMSE / (max(truth) - min(truth))`.
///
/// Expects values in original units; the normalizing range comes from the
/// truth sequence being scored.
pub fn nrmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "prediction has {} values, truth {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sq_sum = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        min = min.min(*t);
        max = max.max(*t);
        let d = p - t;
        sq_sum += d * d;
    }
    if !(max > min) {
        return Err(Error::DegenerateRange);
    }
    Ok((sq_sum / truth.len() as f64).sqrt() / (max - min))
}

/// Precision and recall of one severity class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
}

/// Full evaluation of a prediction set: per-response NRMSE in original
/// units plus severity confusion statistics pooled over responses.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Number of window samples evaluated.
    pub sample_count: usize,
    /// Number of classified (sample, output step, response) points.
    pub timestep_count: usize,
    /// NRMSE per response feature, in dataset response order.
    pub response_nrmse: Vec<(String, f64)>,
    /// Truth severity (rows) x predicted severity (columns).
    pub confusion: [[u64; 4]; 4],
    /// Precision/recall per severity class (0 when the class is absent).
    pub per_class: [ClassMetrics; 4],
    /// Sign-resolved truth counts, [`SIGN_RESOLVED_NAMES`] order.
    pub sign_resolved_truth: [u64; 7],
    /// Sign-resolved predicted counts, [`SIGN_RESOLVED_NAMES`] order.
    pub sign_resolved_pred: [u64; 7],
}

/// Evaluate z-space predictions against a dataset's targets.
///
/// `predictions` is flat `N x O x R`, aligned with the dataset's samples.
/// Both sides are destandardized through `stats` (at each output step's
/// covering start date) for the NRMSE, and classified directly as z-scores
/// for the confusion statistics.
pub fn evaluate_run(
    dataset: &WindowDataset,
    predictions: &[f64],
    stats: &StandardizationStats,
) -> Result<EvalReport> {
    let n = dataset.len();
    let o = dataset.output_steps();
    let r = dataset.num_responses();
    if predictions.len() != n * o * r {
        return Err(Error::Alignment(format!(
            "{} predictions for {n} samples x {o} steps x {r} responses",
            predictions.len()
        )));
    }
    if n == 0 {
        return Err(Error::Alignment("empty dataset".into()));
    }

    // Resolve stats coordinates once per response feature and subbasin.
    let mut feature_pos = Vec::with_capacity(r);
    for name in dataset.responses() {
        // Subbasin id of sample 0 only probes feature presence; per-sample
        // subbasins are resolved below.
        feature_pos.push(
            stats
                .feature_names()
                .iter()
                .position(|f| f == name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?,
        );
    }
    let mut subbasin_pos = Vec::with_capacity(n);
    for idx in 0..n {
        let id = dataset.provenance(idx).subbasin_id;
        subbasin_pos.push(
            stats
                .subbasin_ids()
                .binary_search(&id)
                .map_err(|_| Error::UnknownSubbasin(id))?,
        );
    }

    let mut confusion = [[0u64; 4]; 4];
    let mut sign_truth = [0u64; 7];
    let mut sign_pred = [0u64; 7];
    let mut per_response: Vec<(Vec<f64>, Vec<f64>)> =
        vec![(Vec::with_capacity(n * o), Vec::with_capacity(n * o)); r];

    for idx in 0..n {
        let target = dataset.target(idx);
        let s_pos = subbasin_pos[idx];
        for j in 0..o {
            let doy = crate::calendar::day_of_year(dataset.output_date(idx, j));
            for (resp, &f_pos) in feature_pos.iter().enumerate() {
                let z_truth = target[j * r + resp];
                let z_pred = predictions[(idx * o + j) * r + resp];
                let truth_class = classify_event(z_truth)?;
                let pred_class = classify_event(z_pred)?;
                confusion[truth_class.severity_index()][pred_class.severity_index()] += 1;
                sign_truth[truth_class.sign_resolved_index()] += 1;
                sign_pred[pred_class.sign_resolved_index()] += 1;

                let (preds, truths) = &mut per_response[resp];
                preds.push(stats.raw_at(z_pred, doy, s_pos, f_pos));
                truths.push(stats.raw_at(z_truth, doy, s_pos, f_pos));
            }
        }
    }

    let mut response_nrmse = Vec::with_capacity(r);
    for (resp, (preds, truths)) in per_response.iter().enumerate() {
        response_nrmse.push((dataset.responses()[resp].clone(), nrmse(preds, truths)?));
    }

    let per_class = std::array::from_fn(|class| {
        let truth_total: u64 = confusion[class].iter().sum();
        let pred_total: u64 = confusion.iter().map(|row| row[class]).sum();
        let hits = confusion[class][class];
        ClassMetrics {
            precision: if pred_total > 0 { hits as f64 / pred_total as f64 } else { 0.0 },
            recall: if truth_total > 0 { hits as f64 / truth_total as f64 } else { 0.0 },
        }
    });

    Ok(EvalReport {
        sample_count: n,
        timestep_count: n * o * r,
        response_nrmse,
        confusion,
        per_class,
        sign_resolved_truth: sign_truth,
        sign_resolved_pred: sign_pred,
    })
}

impl EvalReport {
    /// NRMSE of one response feature, by name.
    pub fn nrmse_for(&self, response: &str) -> Option<f64> {
        self.response_nrmse
            .iter()
            .find(|(name, _)| name == response)
            .map(|(_, v)| *v)
    }

    /// Human-readable flat text table.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "samples    {}", self.sample_count)?;
        writeln!(out, "timesteps  {}", self.timestep_count)?;
        writeln!(out)?;
        writeln!(out, "{:<16} {:>10}", "response", "nrmse")?;
        for (name, value) in &self.response_nrmse {
            writeln!(out, "{name:<16} {value:>10.6}")?;
        }
        writeln!(out)?;
        writeln!(out, "event confusion (rows truth, columns predicted)")?;
        write!(out, "{:<10}", "")?;
        for name in SEVERITY_NAMES {
            write!(out, "{name:>10}")?;
        }
        writeln!(out)?;
        for (row, name) in SEVERITY_NAMES.iter().enumerate() {
            write!(out, "{name:<10}")?;
            for col in 0..4 {
                write!(out, "{:>10}", self.confusion[row][col])?;
            }
            writeln!(out)?;
        }
        writeln!(out)?;
        writeln!(out, "{:<10} {:>10} {:>10}", "class", "precision", "recall")?;
        for (class, name) in SEVERITY_NAMES.iter().enumerate() {
            writeln!(
                out,
                "{name:<10} {:>10.6} {:>10.6}",
                self.per_class[class].precision, self.per_class[class].recall
            )?;
        }
        writeln!(out)?;
        writeln!(out, "{:<14} {:>10} {:>10}", "sign-resolved", "truth", "predicted")?;
        for (k, name) in SIGN_RESOLVED_NAMES.iter().enumerate() {
            writeln!(
                out,
                "{name:<14} {:>10} {:>10}",
                self.sign_resolved_truth[k], self.sign_resolved_pred[k]
            )?;
        }
        Ok(())
    }

    /// Flat CSV form: one `section,key,value` row per statistic.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "section,key,value")?;
        writeln!(out, "meta,samples,{}", self.sample_count)?;
        writeln!(out, "meta,timesteps,{}", self.timestep_count)?;
        for (name, value) in &self.response_nrmse {
            writeln!(out, "nrmse,{name},{value}")?;
        }
        for (row, truth_name) in SEVERITY_NAMES.iter().enumerate() {
            for (col, pred_name) in SEVERITY_NAMES.iter().enumerate() {
                writeln!(out, "confusion,{truth_name}:{pred_name},{}", self.confusion[row][col])?;
            }
        }
        for (class, name) in SEVERITY_NAMES.iter().enumerate() {
            writeln!(out, "precision,{name},{}", self.per_class[class].precision)?;
            writeln!(out, "recall,{name},{}", self.per_class[class].recall)?;
        }
        for (k, name) in SIGN_RESOLVED_NAMES.iter().enumerate() {
            writeln!(out, "sign_truth,{name},{}", self.sign_resolved_truth[k])?;
            writeln!(out, "sign_pred,{name},{}", self.sign_resolved_pred[k])?;
        }
        Ok(())
    }
}

/// Plot-ready per-timestep CSV: one row per (sample, output step, response)
/// with original-unit values, z-scores and classes for truth and prediction.
pub fn write_timestep_csv<W: Write>(
    dataset: &WindowDataset,
    predictions: &[f64],
    stats: &StandardizationStats,
    mut out: W,
) -> Result<()> {
    let n = dataset.len();
    let o = dataset.output_steps();
    let r = dataset.num_responses();
    if predictions.len() != n * o * r {
        return Err(Error::Alignment(format!(
            "{} predictions for {n} samples x {o} steps x {r} responses",
            predictions.len()
        )));
    }
    writeln!(out, "date,subbasin,feature,truth,pred,z_truth,z_pred,class_truth,class_pred")?;
    for idx in 0..n {
        let prov = dataset.provenance(idx);
        let target = dataset.target(idx);
        for j in 0..o {
            let date = dataset.output_date(idx, j);
            let doy = crate::calendar::day_of_year(date);
            for (resp, name) in dataset.responses().iter().enumerate() {
                let z_truth = target[j * r + resp];
                let z_pred = predictions[(idx * o + j) * r + resp];
                let (s_pos, f_pos) = stats.lookup(prov.subbasin_id, name)?;
                let truth = stats.raw_at(z_truth, doy, s_pos, f_pos);
                let pred = stats.raw_at(z_pred, doy, s_pos, f_pos);
                writeln!(
                    out,
                    "{date},{},{name},{truth},{pred},{z_truth},{z_pred},{},{}",
                    prov.subbasin_id,
                    classify_event(z_truth)?,
                    classify_event(z_pred)?
                )?;
            }
        }
    }
    Ok(())
}

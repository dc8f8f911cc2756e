//! Sliding-window extraction of (input, output) samples from reduced
//! channels, and deterministic mini-batch iteration.
//!
//! Windows slide with stride 1 over the reduced timesteps of each channel
//! separately and never straddle channels; the per-channel samples are
//! pooled into one dataset.

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calendar::date_fraction;
use crate::error::{Error, Result};
use crate::reduce::ReducedChannelSet;

/// Name of the synthetic date predictor: the covering-period start of each
/// timestep as a day-of-year fraction in [0, 1).
pub const DATE_FEATURE: &str = "date";

/// Shape of a supervised window: `input_steps` of `predictors` in,
/// `output_steps` of `responses` out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSpec {
    pub input_steps: usize,
    pub output_steps: usize,
    pub predictors: Vec<String>,
    pub responses: Vec<String>,
}

impl WindowSpec {
    pub fn new(
        input_steps: usize,
        output_steps: usize,
        predictors: Vec<String>,
        responses: Vec<String>,
    ) -> Result<Self> {
        if output_steps == 0 || input_steps < output_steps {
            return Err(Error::InvalidWindowSpec(format!(
                "need input_steps >= output_steps >= 1, got I={input_steps}, O={output_steps}"
            )));
        }
        if predictors.is_empty() || responses.is_empty() {
            return Err(Error::InvalidWindowSpec(
                "predictors and responses must be nonempty".into(),
            ));
        }
        Ok(Self { input_steps, output_steps, predictors, responses })
    }

    pub fn num_predictors(&self) -> usize {
        self.predictors.len()
    }

    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }
}

/// Where a window sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub channel_id: usize,
    pub subbasin_id: u32,
    /// Reduced-timestep index of the first input step within its channel.
    pub start_index: usize,
    /// Covering start date of the first input step.
    pub start_date: NaiveDate,
}

/// Pooled window samples: inputs `N x I x P`, targets `N x O x R`, with
/// per-sample provenance. Immutable once extracted.
#[derive(Debug, Clone)]
pub struct WindowDataset {
    input_steps: usize,
    output_steps: usize,
    predictors: Vec<String>,
    responses: Vec<String>,
    /// Days covered by one reduced timestep (the reduction window size).
    window_days: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn input_steps(&self) -> usize {
        self.input_steps
    }

    pub fn output_steps(&self) -> usize {
        self.output_steps
    }

    pub fn num_predictors(&self) -> usize {
        self.predictors.len()
    }

    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }

    pub fn predictors(&self) -> &[String] {
        &self.predictors
    }

    pub fn responses(&self) -> &[String] {
        &self.responses
    }

    pub fn window_days(&self) -> usize {
        self.window_days
    }

    /// Input window of sample `n` as a flat `I x P` row-major slice.
    pub fn input(&self, n: usize) -> &[f64] {
        let len = self.input_steps * self.predictors.len();
        &self.inputs[n * len..(n + 1) * len]
    }

    /// Target window of sample `n` as a flat `O x R` row-major slice.
    pub fn target(&self, n: usize) -> &[f64] {
        let len = self.output_steps * self.responses.len();
        &self.targets[n * len..(n + 1) * len]
    }

    pub fn provenance(&self, n: usize) -> &Provenance {
        &self.provenance[n]
    }

    /// Covering start date of input step `i` of sample `n`. Consecutive
    /// steps are exactly `window_days` apart within the originating channel.
    pub fn input_date(&self, n: usize, i: usize) -> NaiveDate {
        self.provenance[n].start_date + chrono::Duration::days((i * self.window_days) as i64)
    }

    /// Covering start date of output step `j` of sample `n` (the step right
    /// after the inputs, in the same channel).
    pub fn output_date(&self, n: usize, j: usize) -> NaiveDate {
        self.input_date(n, self.input_steps + j)
    }

    /// Deterministic shuffled mini-batches of sample indices. Every sample
    /// occurs exactly once; the last batch may be short.
    pub fn batches(&self, batch_size: usize, shuffle_seed: u64) -> Result<Vec<Vec<usize>>> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.is_empty() {
            return Err(Error::InvalidConfig("cannot batch an empty dataset".into()));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        order.shuffle(&mut rng);
        Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
    }
}

/// Extract pooled window samples from every channel with stride 1.
///
/// A channel of length `L` yields `max(0, L - (I+O) + 1)` samples; channels
/// shorter than `I + O` yield none, and at least one channel must be long
/// enough. The synthetic `date` predictor is filled from each input step's
/// covering start date.
pub fn extract_windows(channels: &ReducedChannelSet, spec: &WindowSpec) -> Result<WindowDataset> {
    let spec = WindowSpec::new(
        spec.input_steps,
        spec.output_steps,
        spec.predictors.clone(),
        spec.responses.clone(),
    )?;
    let feature_names = channels.feature_names();
    // Predictor source: Some(feature position) or None for the date feature.
    let mut predictor_src: Vec<Option<usize>> = Vec::with_capacity(spec.predictors.len());
    for name in &spec.predictors {
        if name == DATE_FEATURE {
            predictor_src.push(None);
        } else {
            let pos = feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            predictor_src.push(Some(pos));
        }
    }
    let mut response_src: Vec<usize> = Vec::with_capacity(spec.responses.len());
    for name in &spec.responses {
        let pos = feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        response_src.push(pos);
    }

    let need = spec.input_steps + spec.output_steps;
    let longest = channels.channels.iter().map(|c| c.len()).max().unwrap_or(0);
    if longest < need {
        return Err(Error::InsufficientData { required: need, longest });
    }

    let w = channels.window;
    let subbasin_ids = channels.subbasin_ids();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut provenance = Vec::new();
    for channel in &channels.channels {
        let len = channel.len();
        if len < need {
            continue;
        }
        for (s, &subbasin_id) in subbasin_ids.iter().enumerate() {
            for k in 0..=(len - need) {
                for i in 0..spec.input_steps {
                    let step = k + i;
                    for src in &predictor_src {
                        inputs.push(match src {
                            Some(f) => channel.value(step, s, *f),
                            None => date_fraction(channel.date_of_step(step, w)),
                        });
                    }
                }
                for j in 0..spec.output_steps {
                    let step = k + spec.input_steps + j;
                    for &f in &response_src {
                        targets.push(channel.value(step, s, f));
                    }
                }
                provenance.push(Provenance {
                    channel_id: channel.channel_id,
                    subbasin_id,
                    start_index: k,
                    start_date: channel.date_of_step(k, w),
                });
            }
        }
    }

    Ok(WindowDataset {
        input_steps: spec.input_steps,
        output_steps: spec.output_steps,
        predictors: spec.predictors,
        responses: spec.responses,
        window_days: w,
        inputs,
        targets,
        provenance,
    })
}

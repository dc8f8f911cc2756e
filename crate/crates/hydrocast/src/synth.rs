//! Deterministic generator of watershed-like daily series: seasonal curves
//! with AR(1) noise, rare extreme spikes on the hydrological features, and
//! per-subbasin scale multipliers.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::series::SpatioTemporalSeries;

/// Seasonal period in days. Using the mean tropical-year length (rather
/// than resetting at calendar year ends) lets the phase drift realistically
/// across leap years.
pub const SEASONAL_PERIOD: f64 = 365.25;

/// Generator settings for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSynth {
    pub name: String,
    /// Constant level.
    pub base: f64,
    /// Seasonal sine amplitude.
    pub amplitude: f64,
    /// Seasonal phase shift, in days.
    pub phase_days: f64,
    /// AR(1) coefficient of the noise, in [0, 1).
    pub ar_coeff: f64,
    /// Standard deviation of the AR(1) innovations.
    pub noise_std: f64,
    /// Whether extreme spikes are added to this feature.
    pub spikes: bool,
}

impl FeatureSynth {
    fn new(name: &str, base: f64, amplitude: f64, phase_days: f64, ar_coeff: f64, noise_std: f64, spikes: bool) -> Self {
        Self { name: name.into(), base, amplitude, phase_days, ar_coeff, noise_std, spikes }
    }

    /// Marginal standard deviation of the stationary AR(1) noise.
    fn marginal_std(&self) -> f64 {
        if self.noise_std == 0.0 {
            0.0
        } else {
            self.noise_std / (1.0 - self.ar_coeff * self.ar_coeff).sqrt()
        }
    }
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_days: usize,
    pub n_subbasins: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub features: Vec<FeatureSynth>,
    /// One multiplier per subbasin; empty means all 1.0.
    pub subbasin_scales: Vec<f64>,
    /// Expected spikes per year on spike-enabled features.
    pub spike_rate_per_year: f64,
    /// Spike magnitude, in units of the feature's marginal noise std.
    pub spike_magnitude_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_days: 366,
            n_subbasins: 1,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(1990, 1, 1).expect("valid date"),
            features: vec![
                FeatureSynth::new("precipitation", 3.0, 1.5, 40.0, 0.2, 1.0, false),
                FeatureSynth::new("temp_min", 4.0, 10.0, 100.0, 0.6, 1.8, false),
                FeatureSynth::new("temp_max", 14.0, 12.0, 100.0, 0.6, 2.0, false),
                FeatureSynth::new("soil_water", 50.0, 15.0, 120.0, 0.9, 1.2, true),
                FeatureSynth::new("stream_flow", 20.0, 8.0, 130.0, 0.8, 2.5, true),
            ],
            subbasin_scales: Vec::new(),
            spike_rate_per_year: 4.0,
            spike_magnitude_std: 4.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_days < 366 {
            return Err(Error::InvalidConfig(format!(
                "need at least 366 days, got {}",
                self.n_days
            )));
        }
        if self.n_subbasins == 0 {
            return Err(Error::InvalidConfig("need at least one subbasin".into()));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidConfig("need at least one feature".into()));
        }
        for f in &self.features {
            if !(0.0..1.0).contains(&f.ar_coeff) {
                return Err(Error::InvalidConfig(format!(
                    "feature {}: AR coefficient {} outside [0, 1)",
                    f.name, f.ar_coeff
                )));
            }
            if f.noise_std < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "feature {}: negative noise std",
                    f.name
                )));
            }
        }
        if !self.subbasin_scales.is_empty() && self.subbasin_scales.len() != self.n_subbasins {
            return Err(Error::InvalidConfig(format!(
                "{} subbasin scales for {} subbasins",
                self.subbasin_scales.len(),
                self.n_subbasins
            )));
        }
        if self.spike_rate_per_year < 0.0 || self.spike_magnitude_std < 0.0 {
            return Err(Error::InvalidConfig("spike rate and magnitude must be >= 0".into()));
        }
        Ok(())
    }

    /// Apply `key = value` overrides (as parsed from a config file).
    ///
    /// Recognized keys: `n_days`, `n_subbasins`, `seed`, `start_date`,
    /// `spike_rate`, `spike_magnitude`, `scales` (comma-separated), and
    /// `feature.<name>.<base|amplitude|phase|ar|noise_std|spikes>`.
    pub fn apply_key_values(&mut self, kv: &KeyValues) -> Result<()> {
        for (key, value) in kv.entries() {
            match key.as_str() {
                "n_days" => self.n_days = kv.parse_entry(key, value)?,
                "n_subbasins" => self.n_subbasins = kv.parse_entry(key, value)?,
                "seed" => self.seed = kv.parse_entry(key, value)?,
                "start_date" => {
                    self.start_date =
                        NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|e| {
                            Error::InvalidConfig(format!("bad start_date '{value}': {e}"))
                        })?;
                }
                "spike_rate" => self.spike_rate_per_year = kv.parse_entry(key, value)?,
                "spike_magnitude" => self.spike_magnitude_std = kv.parse_entry(key, value)?,
                "scales" => {
                    self.subbasin_scales = value
                        .split(',')
                        .map(|t| {
                            t.trim().parse::<f64>().map_err(|e| {
                                Error::InvalidConfig(format!("bad scale '{t}': {e}"))
                            })
                        })
                        .collect::<Result<_>>()?;
                }
                _ => {
                    if let Some(rest) = key.strip_prefix("feature.") {
                        let (name, field) = rest.split_once('.').ok_or_else(|| {
                            Error::InvalidConfig(format!("bad feature key '{key}'"))
                        })?;
                        let feature = self
                            .features
                            .iter_mut()
                            .find(|f| f.name == name)
                            .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
                        match field {
                            "base" => feature.base = kv.parse_entry(key, value)?,
                            "amplitude" => feature.amplitude = kv.parse_entry(key, value)?,
                            "phase" => feature.phase_days = kv.parse_entry(key, value)?,
                            "ar" => feature.ar_coeff = kv.parse_entry(key, value)?,
                            "noise_std" => feature.noise_std = kv.parse_entry(key, value)?,
                            "spikes" => feature.spikes = kv.parse_entry(key, value)?,
                            _ => {
                                return Err(Error::InvalidConfig(format!(
                                    "unknown feature field '{field}' in '{key}'"
                                )))
                            }
                        }
                    } else {
                        return Err(Error::InvalidConfig(format!("unknown synth key '{key}'")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generate a deterministic multi-subbasin daily series.
///
/// Per subbasin `s` and feature `f`:
/// `x_t = scale_s * (base + amplitude * sin(2*pi*(t + phase)/365.25) + e_t + spike_t)`
/// with stationary AR(1) noise `e` and, on spike-enabled features,
/// rare spikes of `+-magnitude * marginal_std`.
pub fn generate(config: &SynthConfig) -> Result<SpatioTemporalSeries> {
    config.validate()?;
    let (days, s_count, f_count) = (config.n_days, config.n_subbasins, config.features.len());
    let spike_prob = (config.spike_rate_per_year / SEASONAL_PERIOD).min(1.0);

    // Per (subbasin, feature) value stream, generated independently so that
    // the output is invariant to the order of the main fill loop.
    let mut streams: Vec<Vec<f64>> = Vec::with_capacity(s_count * f_count);
    for s in 0..s_count {
        let scale = config.subbasin_scales.get(s).copied().unwrap_or(1.0);
        for (fi, feature) in config.features.iter().enumerate() {
            let stream_seed =
                splitmix64(config.seed ^ splitmix64((s as u64) << 24 | fi as u64));
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let marginal = feature.marginal_std();

            let mut noise = if feature.noise_std > 0.0 {
                marginal * normal.sample(&mut rng)
            } else {
                0.0
            };
            let mut values = Vec::with_capacity(days);
            for t in 0..days {
                if t > 0 && feature.noise_std > 0.0 {
                    noise = feature.ar_coeff * noise + feature.noise_std * normal.sample(&mut rng);
                }
                let seasonal = feature.amplitude
                    * (std::f64::consts::TAU * (t as f64 + feature.phase_days) / SEASONAL_PERIOD)
                        .sin();
                let mut v = feature.base + seasonal + noise;
                if feature.spikes && spike_prob > 0.0 && config.spike_magnitude_std > 0.0 {
                    // Draws happen every day so spike timing is independent
                    // of whether earlier spikes fired.
                    let fire = rng.gen::<f64>() < spike_prob;
                    let up: bool = rng.gen();
                    if fire {
                        let magnitude = config.spike_magnitude_std * marginal;
                        v += if up { magnitude } else { -magnitude };
                    }
                }
                values.push(scale * v);
            }
            streams.push(values);
        }
    }

    let mut values = Vec::with_capacity(days * s_count * f_count);
    for t in 0..days {
        for s in 0..s_count {
            for f in 0..f_count {
                values.push(streams[s * f_count + f][t]);
            }
        }
    }
    SpatioTemporalSeries::new(
        config.start_date,
        (1..=s_count as u32).collect(),
        config.features.iter().map(|f| f.name.clone()).collect(),
        values,
    )
}

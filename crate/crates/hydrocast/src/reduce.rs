//! Channelized timestep reduction.
//!
//! A daily series is coarsened into windows of `w` days. To keep sliding
//! windows contiguous after reduction, `w/s` channels are produced, each a
//! plain `s = w` reduction applied at a day offset unique to the channel
//! (`offset = channel_id * s`). Reduced timestep `k` of a channel covers the
//! daily half-open range `[offset + k*w, offset + (k+1)*w)`; trailing days
//! that do not fill a whole window are dropped.

use chrono::NaiveDate;

use crate::calendar::date_plus_days;
use crate::error::{Error, Result};
use crate::series::SpatioTemporalSeries;

/// Within-window reduction function. Every feature is aggregated the same
/// way; the mean is the only supported aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Mean,
}

/// Window size and stride of a reduction, with `stride` dividing `window`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReductionConfig {
    pub window: usize,
    pub stride: usize,
    pub aggregator: Aggregator,
}

impl ReductionConfig {
    pub fn new(window: usize, stride: usize) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::InvalidReduction(format!(
                "window and stride must be >= 1, got w={window}, s={stride}"
            )));
        }
        if window % stride != 0 {
            return Err(Error::InvalidReduction(format!(
                "stride must evenly divide window, got w={window}, s={stride}"
            )));
        }
        Ok(Self { window, stride, aggregator: Aggregator::Mean })
    }

    /// Number of channels produced: `window / stride`.
    pub fn channel_count(&self) -> usize {
        self.window / self.stride
    }
}

/// One reduced series at a fixed day offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedChannel {
    pub channel_id: usize,
    /// Day offset of the channel within the source series: `channel_id * stride`.
    pub offset_days: usize,
    /// Covering start date of reduced timestep 0.
    pub start_date: NaiveDate,
    num_subbasins: usize,
    num_features: usize,
    values: Vec<f64>, // len L * S * F
}

impl ReducedChannel {
    /// Number of reduced timesteps.
    pub fn len(&self) -> usize {
        self.values.len() / (self.num_subbasins * self.num_features)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, k: usize, s: usize, f: usize) -> f64 {
        self.values[(k * self.num_subbasins + s) * self.num_features + f]
    }

    /// Covering start date of reduced timestep `k` (the window spans `w` days
    /// from this date).
    pub fn date_of_step(&self, k: usize, window: usize) -> NaiveDate {
        date_plus_days(self.start_date, k * window)
    }
}

/// The full set of `w/s` reduced channels for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedChannelSet {
    pub window: usize,
    pub stride: usize,
    pub channels: Vec<ReducedChannel>,
    subbasin_ids: Vec<u32>,
    feature_names: Vec<String>,
}

impl ReducedChannelSet {
    pub fn subbasin_ids(&self) -> &[u32] {
        &self.subbasin_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }
}

/// Reduce a daily series into `w/s` offset channels of `w`-day means.
pub fn reduce(series: &SpatioTemporalSeries, config: &ReductionConfig) -> Result<ReducedChannelSet> {
    // Reconstructed so invalid hand-built configs fail here too.
    let config = ReductionConfig::new(config.window, config.stride)?;
    let days = series.num_days();
    if days < config.window {
        return Err(Error::SeriesTooShort { window: config.window, days });
    }
    let (w, s_count, f_count) = (config.window, series.num_subbasins(), series.num_features());
    let inv_w = 1.0 / w as f64;

    let mut channels = Vec::with_capacity(config.channel_count());
    for channel_id in 0..config.channel_count() {
        let offset = channel_id * config.stride;
        let len = (days - offset) / w;
        let mut values = vec![0.0; len * s_count * f_count];
        for k in 0..len {
            for day in 0..w {
                let t = offset + k * w + day;
                for s in 0..s_count {
                    for f in 0..f_count {
                        values[(k * s_count + s) * f_count + f] += series.value(t, s, f);
                    }
                }
            }
        }
        for v in &mut values {
            *v *= inv_w;
        }
        channels.push(ReducedChannel {
            channel_id,
            offset_days: offset,
            start_date: date_plus_days(series.start_date(), offset),
            num_subbasins: s_count,
            num_features: f_count,
            values,
        });
    }
    Ok(ReducedChannelSet {
        window: w,
        stride: config.stride,
        channels,
        subbasin_ids: series.subbasin_ids().to_vec(),
        feature_names: series.feature_names().to_vec(),
    })
}

/// Relative per-epoch training work of a `(w, s)` reduction versus daily
/// data, as an exact fraction: `1 / (w * s)`.
///
/// Reduction shrinks sequence length by `1/w` and pooled window-sample count
/// by `1/s`, so the per-epoch operation count scales with their product.
pub fn operation_ratio(window: usize, stride: usize) -> Result<OperationRatio> {
    ReductionConfig::new(window, stride)?;
    Ok(OperationRatio::new(1, (window * stride) as u64))
}

/// An exact non-negative fraction, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperationRatio {
    numerator: u64,
    denominator: u64,
}

impl OperationRatio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator != 0, "zero denominator");
        let g = gcd(numerator.max(1), denominator);
        Self { numerator: numerator / g, denominator: denominator / g }
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

impl std::fmt::Display for OperationRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.denominator == 1 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/{}", self.numerator, self.denominator)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn daily(days: usize) -> SpatioTemporalSeries {
        let values: Vec<f64> = (0..days).map(|t| t as f64).collect();
        SpatioTemporalSeries::new(
            NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            vec![1],
            vec!["x".into()],
            values,
        )
        .unwrap()
    }

    #[test]
    fn window_one_is_identity() {
        let series = daily(10);
        let reduced = reduce(&series, &ReductionConfig::new(1, 1).unwrap()).unwrap();
        assert_eq!(reduced.channels.len(), 1);
        let ch = &reduced.channels[0];
        assert_eq!(ch.len(), 10);
        for k in 0..10 {
            assert_eq!(ch.value(k, 0, 0), k as f64);
        }
    }

    #[test]
    fn weekly_non_overlapping() {
        let series = daily(28);
        let reduced = reduce(&series, &ReductionConfig::new(7, 7).unwrap()).unwrap();
        assert_eq!(reduced.channels.len(), 1);
        assert_eq!(reduced.channels[0].len(), 4);
        // Mean of 0..7 is 3.0.
        assert_eq!(reduced.channels[0].value(0, 0, 0), 3.0);
        assert_eq!(reduced.channels[0].value(3, 0, 0), 24.0);
    }

    #[test]
    fn weekly_stride_one_offsets_and_lengths() {
        let series = daily(28);
        let reduced = reduce(&series, &ReductionConfig::new(7, 1).unwrap()).unwrap();
        let lens: Vec<usize> = reduced.channels.iter().map(|c| c.len()).collect();
        assert_eq!(lens, vec![4, 3, 3, 3, 3, 3, 3]);
        for (i, ch) in reduced.channels.iter().enumerate() {
            assert_eq!(ch.channel_id, i);
            assert_eq!(ch.offset_days, i);
            assert_eq!(
                ch.start_date,
                NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Duration::days(i as i64)
            );
        }
        // Channel 2 step 1 covers days [2+7, 2+14) = 9..16, mean 12.0.
        assert_eq!(reduced.channels[2].value(1, 0, 0), 12.0);
    }

    #[test]
    fn stride_must_divide_window() {
        assert!(matches!(ReductionConfig::new(7, 3), Err(Error::InvalidReduction(_))));
        assert!(matches!(ReductionConfig::new(0, 1), Err(Error::InvalidReduction(_))));
    }

    #[test]
    fn too_short_series() {
        let series = daily(5);
        let err = reduce(&series, &ReductionConfig::new(7, 7).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SeriesTooShort { window: 7, days: 5 }));
    }

    #[test]
    fn operation_ratio_table_values() {
        assert_eq!(operation_ratio(1, 1).unwrap().to_string(), "1");
        assert_eq!(operation_ratio(7, 1).unwrap().to_string(), "1/7");
        assert_eq!(operation_ratio(7, 7).unwrap().to_string(), "1/49");
        assert_eq!(operation_ratio(14, 1).unwrap().to_string(), "1/14");
        assert_eq!(operation_ratio(14, 14).unwrap().to_string(), "1/196");
        assert_eq!(operation_ratio(28, 1).unwrap().to_string(), "1/28");
        assert_eq!(operation_ratio(28, 28).unwrap().to_string(), "1/784");
        assert!(operation_ratio(7, 3).is_err());
    }

    #[test]
    fn channel_coverage_bound() {
        // Sum of covered days never exceeds (w/s) * T, and with s < w and T a
        // multiple of w, channel 0 alone covers every daily index.
        for (w, s, t) in [(7usize, 1usize, 70usize), (14, 7, 84), (28, 14, 112)] {
            let series = daily(t);
            let reduced = reduce(&series, &ReductionConfig::new(w, s).unwrap()).unwrap();
            let covered: usize = reduced.channels.iter().map(|c| c.len() * w).sum();
            assert!(covered <= (w / s) * t);
            assert_eq!(reduced.channels[0].len() * w, t);
        }
    }
}

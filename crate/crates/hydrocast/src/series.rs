//! The spatio-temporal series: a dense T x S x F tensor of daily values
//! with a date axis, CSV ingestion/export, and chronological splitting.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::calendar::{date_plus_days, day_of_year, days_between};
use crate::error::{Error, Result};

/// Dense daily tensor over T days, S subbasins and F features.
///
/// Index `t` corresponds to `start_date + t` days; the value layout is
/// day-major, then subbasin, then feature. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalSeries {
    start_date: NaiveDate,
    subbasin_ids: Vec<u32>,
    feature_names: Vec<String>,
    values: Vec<f64>,
}

impl SpatioTemporalSeries {
    /// Build a series from raw parts, validating every structural invariant.
    pub fn new(
        start_date: NaiveDate,
        subbasin_ids: Vec<u32>,
        feature_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let s = subbasin_ids.len();
        let f = feature_names.len();
        if s == 0 || f == 0 {
            return Err(Error::InvalidSeries(
                "need at least one subbasin and one feature".into(),
            ));
        }
        if values.is_empty() || values.len() % (s * f) != 0 {
            return Err(Error::InvalidSeries(format!(
                "value count {} is not a positive multiple of subbasins*features {}",
                values.len(),
                s * f
            )));
        }
        for (i, w) in subbasin_ids.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidSeries(format!(
                    "subbasin ids must be strictly increasing, got {} then {} at position {}",
                    w[0],
                    w[1],
                    i + 1
                )));
            }
        }
        for (i, name) in feature_names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidSeries("empty feature name".into()));
            }
            if feature_names[..i].contains(name) {
                return Err(Error::InvalidSeries(format!("duplicate feature name '{name}'")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at flat index {pos}"
            )));
        }
        Ok(Self { start_date, subbasin_ids, feature_names, values })
    }

    pub fn num_days(&self) -> usize {
        self.values.len() / (self.subbasin_ids.len() * self.feature_names.len())
    }

    pub fn num_subbasins(&self) -> usize {
        self.subbasin_ids.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    /// Last date covered by the series (inclusive).
    pub fn end_date(&self) -> NaiveDate {
        date_plus_days(self.start_date, self.num_days() - 1)
    }

    pub fn subbasin_ids(&self) -> &[u32] {
        &self.subbasin_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Calendar date of day index `t`.
    pub fn date_at(&self, t: usize) -> NaiveDate {
        date_plus_days(self.start_date, t)
    }

    /// Day-of-year slot (1..=366) of day index `t`.
    pub fn day_of_year_at(&self, t: usize) -> u16 {
        day_of_year(self.date_at(t))
    }

    /// Position of a subbasin id in the tensor.
    pub fn subbasin_index(&self, subbasin: u32) -> Result<usize> {
        self.subbasin_ids
            .binary_search(&subbasin)
            .map_err(|_| Error::UnknownSubbasin(subbasin))
    }

    /// Position of a feature name in the tensor.
    pub fn feature_index(&self, feature: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == feature)
            .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
    }

    #[inline]
    fn flat(&self, t: usize, s: usize, f: usize) -> usize {
        (t * self.subbasin_ids.len() + s) * self.feature_names.len() + f
    }

    /// Value at (day, subbasin position, feature position).
    #[inline]
    pub fn value(&self, t: usize, s: usize, f: usize) -> f64 {
        self.values[self.flat(t, s, f)]
    }

    /// Flat day-major value buffer.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The `T x 1 x F` slice for one subbasin, keeping dates and features.
    pub fn select_subbasin(&self, subbasin: u32) -> Result<SpatioTemporalSeries> {
        let s = self.subbasin_index(subbasin)?;
        let (days, f) = (self.num_days(), self.num_features());
        let mut values = Vec::with_capacity(days * f);
        for t in 0..days {
            let base = self.flat(t, s, 0);
            values.extend_from_slice(&self.values[base..base + f]);
        }
        SpatioTemporalSeries::new(
            self.start_date,
            vec![subbasin],
            self.feature_names.clone(),
            values,
        )
    }

    /// Split chronologically into (train, val, test) at the two inclusive
    /// boundary dates. The three pieces partition the series exactly.
    pub fn split_by_date(&self, split: &DateSplit) -> Result<SplitSeries> {
        split.validate(self.start_date, self.end_date())?;
        let train_len = days_between(self.start_date, split.train_end) as usize + 1;
        let val_len = days_between(split.train_end, split.val_end) as usize;
        let test_start = train_len + val_len;
        let row = self.subbasin_ids.len() * self.feature_names.len();

        let piece = |day_range: std::ops::Range<usize>, start: NaiveDate| {
            SpatioTemporalSeries::new(
                start,
                self.subbasin_ids.clone(),
                self.feature_names.clone(),
                self.values[day_range.start * row..day_range.end * row].to_vec(),
            )
        };
        Ok(SplitSeries {
            train: piece(0..train_len, self.start_date)?,
            val: piece(train_len..test_start, date_plus_days(self.start_date, train_len))?,
            test: piece(test_start..self.num_days(), date_plus_days(self.start_date, test_start))?,
        })
    }

    /// Split boundaries at the given fractions of the day count, with every
    /// piece guaranteed at least one day.
    pub fn fractional_split(&self, train_fraction: f64, val_fraction: f64) -> Result<DateSplit> {
        if !(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0) {
            return Err(Error::SplitOutOfRange(format!(
                "fractions must be positive and sum below 1, got {train_fraction} and {val_fraction}"
            )));
        }
        let days = self.num_days();
        if days < 3 {
            return Err(Error::SplitOutOfRange(format!(
                "cannot three-way split a {days}-day series"
            )));
        }
        let train_len = ((days as f64 * train_fraction).round() as usize).clamp(1, days - 2);
        let val_len =
            ((days as f64 * val_fraction).round() as usize).clamp(1, days - train_len - 1);
        Ok(DateSplit {
            train_end: date_plus_days(self.start_date, train_len - 1),
            val_end: date_plus_days(self.start_date, train_len + val_len - 1),
        })
    }

    /// Concatenate date-contiguous pieces back into one series.
    pub fn concat(pieces: &[&SpatioTemporalSeries]) -> Result<SpatioTemporalSeries> {
        let first = pieces.first().ok_or_else(|| {
            Error::InvalidSeries("cannot concatenate zero pieces".into())
        })?;
        let mut values = Vec::new();
        let mut expected_start = first.start_date;
        for piece in pieces {
            if piece.subbasin_ids != first.subbasin_ids
                || piece.feature_names != first.feature_names
            {
                return Err(Error::InvalidSeries(
                    "concatenated pieces must share subbasins and features".into(),
                ));
            }
            if piece.start_date != expected_start {
                return Err(Error::InvalidSeries(format!(
                    "gap or overlap at {}: expected piece to start {expected_start}",
                    piece.start_date
                )));
            }
            values.extend_from_slice(&piece.values);
            expected_start = date_plus_days(piece.start_date, piece.num_days());
        }
        SpatioTemporalSeries::new(
            first.start_date,
            first.subbasin_ids.clone(),
            first.feature_names.clone(),
            values,
        )
    }

    /// Write the series as long-format CSV (`date,subbasin,<features...>`).
    ///
    /// Floats are written in shortest round-trip form, so re-ingesting
    /// reproduces the tensor bit-exactly.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = String::from("date,subbasin");
        for name in &self.feature_names {
            write!(header, ",{name}").expect("string write");
        }
        writeln!(out, "{header}")?;
        let mut line = String::new();
        for t in 0..self.num_days() {
            let date = self.date_at(t);
            for (s, id) in self.subbasin_ids.iter().enumerate() {
                line.clear();
                write!(line, "{date},{id}").expect("string write");
                for f in 0..self.num_features() {
                    write!(line, ",{}", self.value(t, s, f)).expect("string write");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    /// Write the series to a CSV file at `path`.
    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Inclusive chronological split boundaries for train and validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateSplit {
    pub train_end: NaiveDate,
    pub val_end: NaiveDate,
}

impl DateSplit {
    pub fn new(train_end: NaiveDate, val_end: NaiveDate) -> Self {
        Self { train_end, val_end }
    }

    fn validate(&self, start: NaiveDate, end: NaiveDate) -> Result<()> {
        if self.train_end < start || self.train_end >= self.val_end || self.val_end >= end {
            return Err(Error::SplitOutOfRange(format!(
                "need start <= train_end < val_end < last date, got series {start}..{end} \
                 with train_end {} and val_end {}",
                self.train_end, self.val_end
            )));
        }
        Ok(())
    }
}

/// The three chronological pieces produced by [`SpatioTemporalSeries::split_by_date`].
#[derive(Debug, Clone)]
pub struct SplitSeries {
    pub train: SpatioTemporalSeries,
    pub val: SpatioTemporalSeries,
    pub test: SpatioTemporalSeries,
}

/// Column-name remapping applied to a CSV header before ingestion.
///
/// Each `(from, to)` pair renames a header column; after renaming, the header
/// must contain `date` and `subbasin`, and every remaining column is taken as
/// a feature in header order.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    renames: Vec<(String, String)>,
}

impl CsvSchema {
    /// Parse a schema flag of the form `FROM=to[,FROM=to...]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut renames = Vec::new();
        for part in spec.split(',').filter(|p| !p.is_empty()) {
            let (from, to) = part.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("schema entry '{part}' is not FROM=to"))
            })?;
            renames.push((from.trim().to_string(), to.trim().to_string()));
        }
        Ok(Self { renames })
    }

    fn apply(&self, column: &str) -> String {
        for (from, to) in &self.renames {
            if from == column {
                return to.clone();
            }
        }
        column.to_string()
    }
}

/// Ingest a long-format CSV into a dense series.
///
/// Rows carry `(date, subbasin, one column per feature)` in any row order;
/// the (date, subbasin) grid must be complete, dates must form a contiguous
/// daily range, and every (date, subbasin) may appear only once.
pub fn ingest_csv<P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<SpatioTemporalSeries> {
    let file = std::fs::File::open(path)?;
    ingest_csv_reader(BufReader::new(file), schema)
}

/// Ingest from any reader; see [`ingest_csv`].
pub fn ingest_csv_reader<R: BufRead>(
    reader: R,
    schema: &CsvSchema,
) -> Result<SpatioTemporalSeries> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::CsvParse { line: 1, message: "empty file".into() });
        }
    };
    let columns: Vec<String> = header.split(',').map(|c| schema.apply(c.trim())).collect();
    let date_col = columns.iter().position(|c| c == "date").ok_or(Error::CsvParse {
        line: 1,
        message: "header has no 'date' column (use --schema to remap)".into(),
    })?;
    let subbasin_col = columns.iter().position(|c| c == "subbasin").ok_or(Error::CsvParse {
        line: 1,
        message: "header has no 'subbasin' column (use --schema to remap)".into(),
    })?;
    let feature_cols: Vec<usize> = (0..columns.len())
        .filter(|&i| i != date_col && i != subbasin_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::CsvParse { line: 1, message: "no feature columns".into() });
    }
    let feature_names: Vec<String> =
        feature_cols.iter().map(|&i| columns[i].clone()).collect();

    let mut rows: Vec<(NaiveDate, u32, Vec<f64>)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::CsvParse {
                line: line_no,
                message: format!("expected {} fields, got {}", columns.len(), fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[date_col].trim(), "%Y-%m-%d").map_err(
            |e| Error::CsvParse {
                line: line_no,
                message: format!("bad date '{}': {e}", fields[date_col]),
            },
        )?;
        let subbasin: u32 = fields[subbasin_col].trim().parse().map_err(|e| Error::CsvParse {
            line: line_no,
            message: format!("bad subbasin '{}': {e}", fields[subbasin_col]),
        })?;
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let v: f64 = fields[c].trim().parse().map_err(|e| Error::CsvParse {
                line: line_no,
                message: format!("bad number '{}' in column '{}': {e}", fields[c], columns[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::CsvParse {
                    line: line_no,
                    message: format!("non-finite value in column '{}'", columns[c]),
                });
            }
            values.push(v);
        }
        rows.push((date, subbasin, values));
    }
    if rows.is_empty() {
        return Err(Error::CsvParse { line: 1, message: "no data rows".into() });
    }

    let mut subbasin_ids: Vec<u32> = rows.iter().map(|r| r.1).collect();
    subbasin_ids.sort_unstable();
    subbasin_ids.dedup();
    let start_date = rows.iter().map(|r| r.0).min().expect("nonempty");
    let end_date = rows.iter().map(|r| r.0).max().expect("nonempty");
    let num_days = days_between(start_date, end_date) as usize + 1;
    let (s, f) = (subbasin_ids.len(), feature_names.len());

    let subbasin_pos: HashMap<u32, usize> =
        subbasin_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut values = vec![f64::NAN; num_days * s * f];
    let mut seen = vec![false; num_days * s];
    for (date, subbasin, row) in rows {
        let t = days_between(start_date, date) as usize;
        let sp = subbasin_pos[&subbasin];
        let cell = t * s + sp;
        if seen[cell] {
            return Err(Error::DuplicateKey { date, subbasin });
        }
        seen[cell] = true;
        values[cell * f..(cell + 1) * f].copy_from_slice(&row);
    }
    if let Some(cell) = seen.iter().position(|&v| !v) {
        return Err(Error::IncompleteGrid {
            date: date_plus_days(start_date, cell / s),
            subbasin: subbasin_ids[cell % s],
        });
    }

    SpatioTemporalSeries::new(start_date, subbasin_ids, feature_names, values)
}

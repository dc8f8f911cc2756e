//! Self-describing text checkpoints for trained models.
//!
//! Values are written in shortest round-trip decimal form, so a load after a
//! save reproduces every parameter bit-exactly.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::blstm::{BlstmConfig, BlstmModel};

/// A model snapshot plus the epoch and validation loss it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: BlstmModel,
    pub epoch: usize,
    pub val_mse: f64,
}

impl Checkpoint {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let cfg = &self.model.config;
        writeln!(out, "hydrocast-blstm v1")?;
        writeln!(out, "predictors {}", cfg.num_predictors)?;
        writeln!(out, "hidden {}", cfg.hidden)?;
        writeln!(out, "input_steps {}", cfg.input_steps)?;
        writeln!(out, "output_steps {}", cfg.output_steps)?;
        writeln!(out, "responses {}", cfg.num_responses)?;
        writeln!(out, "epoch {}", self.epoch)?;
        writeln!(out, "val_mse {}", self.val_mse)?;
        let mut line = String::new();
        for entry in self.model.param_entries() {
            writeln!(out, "param {} {} {}", entry.name, entry.rows, entry.cols)?;
            for row in entry.values.chunks(entry.cols) {
                line.clear();
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        line.push(' ');
                    }
                    write!(line, "{v}").expect("string write");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let origin = path.as_ref().display().to_string();
        let file = std::fs::File::open(path)?;
        Self::read(BufReader::new(file), &origin)
    }

    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let bad = |message: String| Error::FileFormat { path: origin.to_string(), message };
        let mut lines = reader.lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| bad("unexpected end of file".into()))
        };

        let magic = next_line()?;
        if magic.trim() != "hydrocast-blstm v1" {
            return Err(bad(format!("bad magic line '{magic}'")));
        }
        let mut field = |keyword: &str| -> Result<f64> {
            let line = next_line()?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(k), Some(v)) if k == keyword => {
                    v.parse().map_err(|e| bad(format!("bad {keyword} value '{v}': {e}")))
                }
                _ => Err(bad(format!("expected '{keyword} <value>', got '{line}'"))),
            }
        };
        let config = BlstmConfig {
            num_predictors: field("predictors")? as usize,
            hidden: field("hidden")? as usize,
            input_steps: field("input_steps")? as usize,
            output_steps: field("output_steps")? as usize,
            num_responses: field("responses")? as usize,
        };
        let epoch = field("epoch")? as usize;
        let val_mse = field("val_mse")?;

        let mut model = BlstmModel::init(config, 0)?;
        for entry in model.param_entries_mut() {
            let header = next_line()?;
            let mut parts = header.split_whitespace();
            if parts.next() != Some("param") {
                return Err(bad(format!("expected 'param ...', got '{header}'")));
            }
            let name = parts.next().unwrap_or_default();
            if name != entry.name {
                return Err(bad(format!("expected param '{}', got '{name}'", entry.name)));
            }
            let rows: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(format!("bad rows in '{header}'")))?;
            let cols: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(format!("bad cols in '{header}'")))?;
            if rows != entry.rows || cols != entry.cols {
                return Err(bad(format!(
                    "param {}: expected {}x{}, got {rows}x{cols}",
                    entry.name, entry.rows, entry.cols
                )));
            }
            let mut filled = 0;
            while filled < entry.values.len() {
                let line = next_line()?;
                for tok in line.split_whitespace() {
                    if filled >= entry.values.len() {
                        return Err(bad(format!("too many values for param {}", entry.name)));
                    }
                    entry.values[filled] = tok
                        .parse()
                        .map_err(|e| bad(format!("bad value '{tok}' in {}: {e}", entry.name)))?;
                    filled += 1;
                }
            }
        }
        Ok(Checkpoint { model, epoch, val_mse })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for seed in [0u64, 1, 99] {
            let model = BlstmModel::init(
                BlstmConfig {
                    num_predictors: 3,
                    hidden: 5,
                    input_steps: 6,
                    output_steps: 2,
                    num_responses: 2,
                },
                seed,
            )
            .unwrap();
            let ckpt = Checkpoint { model, epoch: 17, val_mse: 0.031_25 };
            let mut buf = Vec::new();
            ckpt.write(&mut buf).unwrap();
            let back = Checkpoint::read(BufReader::new(buf.as_slice()), "mem").unwrap();
            assert_eq!(ckpt, back);

            // Serialization itself is deterministic.
            let mut buf2 = Vec::new();
            back.write(&mut buf2).unwrap();
            assert_eq!(buf, buf2);
        }
    }

    #[test]
    fn rejects_wrong_magic() {
        let err = Checkpoint::read(BufReader::new(&b"nonsense\n"[..]), "mem").unwrap_err();
        assert!(matches!(err, Error::FileFormat { .. }));
    }
}

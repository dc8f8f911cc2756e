//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored.
//! Later entries override earlier ones when queried through [`KeyValues::get`].

use std::path::Path;

use crate::error::{Error, Result};

/// Parsed entries of a key-value config file, in file order.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: '{raw}' is not 'key = value'", idx + 1))
            })?;
            entries.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Last value for a key, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parse one `(key, value)` entry, naming the key in errors.
    pub fn parse_entry<T>(&self, key: &str, value: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        value
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("bad value '{value}' for '{key}': {e}")))
    }

    /// Typed lookup: `Ok(None)` when absent, parse error when malformed.
    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            Some(value) => Ok(Some(self.parse_entry(key, value)?)),
            None => Ok(None),
        }
    }
}

//! Flat `key = value` run-configuration files.
//!
//! One assignment per line; blank lines and lines whose first non-space
//! character is `#` are ignored. Keys may not repeat. Values run from the
//! first `=` to the end of the line (so a value may itself contain `=`),
//! with surrounding whitespace trimmed. Which keys are *meaningful* depends
//! on the subcommand, so this module only tokenizes; the caller looks keys
//! up by name and must reject the ones it does not recognize.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One `key = value` assignment and the 1-based line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl ConfigEntry {
    /// Parses the value, pointing at the assignment's line on failure.
    pub fn parse<T>(&self) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.value.parse().map_err(|e| Error::Config {
            line: self.line,
            message: format!("key {}: invalid value {:?} ({e})", self.key, self.value),
        })
    }
}

/// Tokenizes a configuration file into assignments, rejecting malformed
/// lines and duplicate keys.
pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut entries: Vec<ConfigEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got {trimmed:?}"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Config {
                line,
                message: format!("invalid key {key:?}"),
            });
        }
        if value.is_empty() {
            return Err(Error::Config {
                line,
                message: format!("key {key} has an empty value"),
            });
        }
        if let Some(previous) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Config {
                line,
                message: format!("key {key} already set on line {}", previous.line),
            });
        }
        entries.push(ConfigEntry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(entries)
}

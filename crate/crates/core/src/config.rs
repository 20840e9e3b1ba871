//! Plain-text `key=value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped,
/// whitespace around keys and values is trimmed. Duplicate keys are errors.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key=value", n + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Format(format!("line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Format(format!("line {}: duplicate key {key}", n + 1)));
        }
    }
    Ok(out)
}

/// Typed access to a parsed key/value map that tracks which keys were used.
#[derive(Debug, Default)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
    used: Vec<String>,
}

impl KeyValues {
    pub fn new(map: BTreeMap<String, String>) -> Self {
        KeyValues { map, used: Vec::new() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(KeyValues::new(parse_key_values(text)?))
    }

    pub fn get<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.used.push(key.to_string());
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("invalid value {v:?} for key {key}"))),
        }
    }

    pub fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    /// Errors if any key was never requested.
    pub fn finish(self) -> Result<()> {
        let unknown: Vec<&String> = self.map.keys().filter(|k| !self.used.contains(k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "unknown configuration keys: {}",
                unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )))
        }
    }
}

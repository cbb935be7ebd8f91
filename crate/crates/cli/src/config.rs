//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use the long flag
//! names with either `-` or `_` (`r-grid` and `r_grid` are the same key).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

pub const KNOWN_KEYS: &[&str] = &[
    "n", "sigma", "radius", "r_grid", "dt", "paths", "seed", "out", "trace", "max_steps", "y0", "r",
    "r0",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value, got {raw:?}", lineno + 1);
            };
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key {key:?}", lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag value if given, else the config value, else `None`.
pub fn pick(flag: Option<&String>, file: Option<&ConfigFile>, key: &str) -> Option<String> {
    flag.cloned()
        .or_else(|| file.and_then(|f| f.get(key)).map(str::to_string))
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} {s:?}: {e}")))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("empty {what} list");
    }
    Ok(items)
}

pub fn parse_one<T: std::str::FromStr>(text: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = parse_list(text, what)?;
    match <[T; 1]>::try_from(items) {
        Ok([v]) => Ok(v),
        Err(_) => bail!("{what} takes a single value, got {text:?}"),
    }
}

pub fn parse_bool(text: &str) -> Result<bool> {
    match text.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

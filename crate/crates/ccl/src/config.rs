//! TOML config files for the pipeline stages and the echo of the effective
//! config written into output headers.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{read_string, IoError, Result};

/// Reads a config file; absent keys keep their defaults.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read_string(path)?).map_err(|e| IoError::invalid(path, e.to_string()))
}

/// `value` as TOML lines under a `[section]` heading.
pub fn echo<T: Serialize>(section: &str, value: &T) -> Vec<String> {
    let mut table = toml::Table::new();
    table.insert(section.into(), toml::Value::try_from(value).expect("config serializes"));
    toml::to_string(&table)
        .expect("config serializes")
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

//! Config-file support: a JSON object or `key=value` lines. Flags always
//! win over file values.

use std::collections::HashMap;
use std::path::Path;

use anyhow::Context;
use serde_json::Value;

pub struct ConfigFile {
    values: HashMap<String, Value>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile {
            values: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let trimmed = text.trim_start();
        let values = if trimmed.starts_with('{') {
            match serde_json::from_str::<Value>(&text)? {
                Value::Object(map) => map.into_iter().collect(),
                other => anyhow::bail!("config must be a JSON object, found {other}"),
            }
        } else {
            let mut map = HashMap::new();
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .with_context(|| format!("config line {}: expected key=value", idx + 1))?;
                let value = value.trim();
                // numbers and booleans parse as themselves, the rest as strings
                let parsed = serde_json::from_str::<Value>(value)
                    .unwrap_or_else(|_| Value::String(value.to_string()));
                map.insert(key.trim().to_string(), parsed);
            }
            map
        };
        Ok(ConfigFile { values })
    }

    fn get<T, F: FnOnce(&Value) -> Option<T>>(&self, key: &str, convert: F) -> anyhow::Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => convert(v)
                .map(Some)
                .with_context(|| format!("config key {key}: unexpected value {v}")),
        }
    }

    pub fn u64(&self, key: &str) -> anyhow::Result<Option<u64>> {
        self.get(key, |v| v.as_u64())
    }

    pub fn usize(&self, key: &str) -> anyhow::Result<Option<usize>> {
        self.get(key, |v| v.as_u64().map(|n| n as usize))
    }

    pub fn f64(&self, key: &str) -> anyhow::Result<Option<f64>> {
        self.get(key, |v| v.as_f64())
    }

    pub fn bool(&self, key: &str) -> anyhow::Result<Option<bool>> {
        self.get(key, |v| v.as_bool())
    }

    pub fn string(&self, key: &str) -> anyhow::Result<Option<String>> {
        self.get(key, |v| v.as_str().map(|s| s.to_string()))
    }

    /// Levels either as a JSON array or a "5,6,7" string.
    pub fn levels(&self, key: &str) -> anyhow::Result<Option<Vec<u8>>> {
        self.get(key, |v| match v {
            Value::Array(items) => items
                .iter()
                .map(|x| x.as_u64().map(|n| n as u8))
                .collect::<Option<Vec<u8>>>(),
            Value::String(s) => crate::parse_levels(s).ok(),
            _ => None,
        })
    }
}

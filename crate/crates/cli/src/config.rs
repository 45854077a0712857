//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Values given on the
//! command line win over the file, which wins over built-in defaults.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "scenarios",
    "scenario_ms",
    "fps",
    "epochs",
    "batch_size",
    "learning_rate",
    "momentum",
    "clip_norm",
    "hidden_dim",
    "validation_fraction",
    "window_stride",
    "threshold",
    "queue_capacity",
    "stride",
    "default_threshold_ms",
    "sensitized_threshold_ms",
    "yawn_memory_ms",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", n + 1))
            })?;
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key {k:?}",
                    n + 1
                )));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Flag value, else file value, else `default`.
    pub fn resolve<T: FromStr>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let c = ConfigFile::parse("# comment\nepochs = 7\n\nlearning_rate=0.1\n").unwrap();
        assert_eq!(c.resolve("epochs", Some(3usize), 100).unwrap(), 3);
        assert_eq!(c.resolve("epochs", None, 100usize).unwrap(), 7);
        assert_eq!(c.resolve("batch_size", None, 64usize).unwrap(), 64);
        assert_eq!(c.resolve("learning_rate", None, 0.05).unwrap(), 0.1);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(ConfigFile::parse("epochs 7").is_err());
        assert!(ConfigFile::parse("colour = red").is_err());
        let c = ConfigFile::parse("epochs = many").unwrap();
        assert!(c.resolve("epochs", None, 1usize).is_err());
    }
}

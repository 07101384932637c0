//! Layered settings. A value comes from the command-line flag, else the
//! `GEOFEED_*` environment variable (handled by clap), else the config
//! file, else the built-in default.
//!
//! The config file is flat `key = value` text whose keys are the long flag
//! names, for example `timeout-ms = 5000`. `#` starts a comment line.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Keys accepted in a config file.
pub const KNOWN_KEYS: &[&str] = &[
    "timeout-ms",
    "retries",
    "redirects",
    "max-body",
    "parallelism",
    "allow-insecure",
    "per-host-concurrency",
    "per-host-delay-ms",
    "user-agent",
    "offline",
    "cache",
    "as-categories-api",
    "api",
    "api-token",
    "api-interval-ms",
    "match-rule",
    "country-min-share",
    "all-v6-lengths",
];

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings> {
        let Some(path) = path else { return Ok(Settings::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Ok(Settings { file: parse(&text).with_context(|| format!("in config {}", path.display()))?, resolved: BTreeMap::new() })
    }

    /// Flag (or env) value, else config file value, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`get`](Self::get) without a default.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(text) => Some(text.parse::<T>().map_err(|e| anyhow::anyhow!("config key {key}: {e}"))?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Resolved values, for the run manifest. Secrets are masked.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.resolved.iter().map(|(k, v)| (k.clone(), if k == "api-token" { "***".to_string() } else { v.clone() })).collect()
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }
}

fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value", i + 1);
        };
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            bail!("line {}: unknown key {key:?}", i + 1);
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let mut s = Settings { file: parse("# c\nretries = 7\ntimeout-ms=250\n").unwrap(), ..Default::default() };
        assert_eq!(s.get("retries", Some(1u32), 2).unwrap(), 1);
        assert_eq!(s.get("timeout-ms", None, 10_000u64).unwrap(), 250);
        assert_eq!(s.get("redirects", None, 5u32).unwrap(), 5);
        assert_eq!(s.snapshot()["retries"], "1");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse("retries 7").is_err());
        assert!(parse("retry = 7").is_err());
        let mut s = Settings { file: parse("retries = many").unwrap(), ..Default::default() };
        assert!(s.get("retries", None, 2u32).is_err());
    }

    #[test]
    fn masks_tokens() {
        let mut s = Settings::default();
        s.get("api-token", Some("secret".to_string()), String::new()).unwrap();
        assert_eq!(s.snapshot()["api-token"], "***");
    }
}

//! `key = value` config files backing command flags.
//!
//! Lines are `key = value`; `#` starts a comment. Keys use the long flag
//! names (`batch-size`, `iterations`, …). Flags given on the command line
//! win over the file, which wins over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses `text`, rejecting keys outside `allowed`.
    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            if !allowed.contains(&k) {
                bail!("config line {}: unknown key {k:?} (allowed: {})", i + 1, allowed.join(", "));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                bail!("config line {}: duplicate key {k:?}", i + 1);
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text, allowed)
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key {key}: {e}")))
            .transpose()
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }
}

/// Comma-separated list of values.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow!("invalid list item {t:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c = ConfigFile::parse("# c\niterations = 10\nseed=7 # trailing\n", &["iterations", "seed"]).unwrap();
        assert_eq!(c.get::<usize>("iterations").unwrap(), Some(10));
        assert_eq!(c.pick(None, "seed", 42u64).unwrap(), 7);
        assert_eq!(c.pick(Some(3), "seed", 42u64).unwrap(), 3);
        assert_eq!(c.pick(None, "lr", 0.5f64).unwrap(), 0.5);
        assert!(ConfigFile::parse("bogus = 1", &["seed"]).is_err());
        assert!(ConfigFile::parse("seed 1", &["seed"]).is_err());
        assert!(ConfigFile::parse("seed = x", &["seed"]).unwrap().get::<u64>("seed").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("5, 10,25").unwrap(), vec![5, 10, 25]);
        assert!(parse_list::<usize>("5,x").is_err());
    }
}

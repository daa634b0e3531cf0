//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Keys are checked against the list accepted by each command, so a typo
//! fails instead of silently falling back to a default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(CliError::input(format!("line {line_no}: empty key")));
            }
            if value.is_empty() {
                return Err(CliError::input(format!("line {line_no}: empty value for `{key}`")));
            }
            if entries.insert(key.to_string(), (line_no, value.to_string())).is_some() {
                return Err(CliError::input(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    /// Errors on the first key not in `allowed`.
    pub fn restrict(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(CliError::input(format!(
                "line {line}: unknown key `{k}` (accepted: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::input(format!("line {line}: cannot parse `{key}` from `{v}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| CliError::input(format!("missing required key `{key}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let c = Config::parse("# header\n beta = 0.5 # radius\n\np=2\n").unwrap();
        assert_eq!(c.require::<f64>("beta").unwrap(), 0.5);
        assert_eq!(c.get::<f64>("p").unwrap(), Some(2.0));
        assert_eq!(c.get::<f64>("q").unwrap(), None);
        assert!(c.restrict(&["beta", "p"]).is_ok());
        assert!(c.restrict(&["beta"]).is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("beta 1").is_err());
        assert!(Config::parse("= 1").is_err());
        assert!(Config::parse("a =").is_err());
        assert!(Config::parse("a = 1\na = 2").is_err());
        let c = Config::parse("a = x").unwrap();
        assert!(c.require::<f64>("a").is_err());
        assert!(c.require::<f64>("b").is_err());
    }
}

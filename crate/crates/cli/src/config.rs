//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! suite = testbed
//!
//! [testbed]
//! input_dim = 10
//! temperature = 0.1
//! ```
//!
//! The only top-level key is `suite`; the one section must be named after
//! it. Every key is checked and unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Parsed sections in file order. The top level is the section `""`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut sections: Vec<(String, Vec<(String, String)>)> = vec![(String::new(), Vec::new())];
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
                    .ok_or_else(|| CliError::config(format!("line {}: malformed section header", n + 1)))?;
                if sections.iter().any(|(s, _)| s == name) {
                    return Err(CliError::config(format!("line {}: duplicate section [{name}]", n + 1)));
                }
                sections.push((name.to_string(), Vec::new()));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| CliError::config(format!("line {}: expected key = value", n + 1)))?;
            let entries = &mut sections.last_mut().unwrap().1;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(CliError::config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(RawConfig { sections })
    }

    pub fn section(&self, name: &str) -> Option<&[(String, String)]> {
        self.sections.iter().find(|(s, _)| s == name).map(|(_, e)| e.as_slice())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            if entries.is_empty() && name.is_empty() {
                continue;
            }
            if !name.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{name}]\n"));
            }
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Typed reads from one section; leftover keys are reported by
/// [`Section::finish`].
pub struct Section {
    name: String,
    entries: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: &str, entries: &[(String, String)]) -> Self {
        Section { name: name.to_string(), entries: entries.iter().cloned().collect(), resolved: Vec::new() }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn err(&self, key: &str, msg: impl Display) -> CliError {
        CliError::config(format!("[{}] {key}: {msg}", self.name))
    }

    fn record(&mut self, key: &str, value: String) {
        self.resolved.push((key.to_string(), value));
    }

    pub fn parse_or<T>(&mut self, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match self.take(key) {
            Some(raw) => raw.parse::<T>().map_err(|e| self.err(key, format!("cannot parse '{raw}': {e}")))?,
            None => default,
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Integer in `[lo, hi]`.
    pub fn count(&mut self, key: &str, default: usize, lo: usize, hi: usize) -> CliResult<usize> {
        let v = self.parse_or(key, default)?;
        if v < lo || v > hi {
            return Err(self.err(key, format!("{v} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    /// Finite real satisfying `ok`, described by `range` in errors.
    pub fn real(&mut self, key: &str, default: f64, range: &str, ok: impl Fn(f64) -> bool) -> CliResult<f64> {
        let v = self.parse_or(key, default)?;
        if !v.is_finite() || !ok(v) {
            return Err(self.err(key, format!("{v} must be {range}")));
        }
        Ok(v)
    }

    pub fn flag(&mut self, key: &str, default: bool) -> CliResult<bool> {
        self.parse_or(key, default)
    }

    /// One of `choices`.
    pub fn choice(&mut self, key: &str, default: &str, choices: &[&str]) -> CliResult<String> {
        let v = self.take(key).unwrap_or_else(|| default.to_string());
        if !choices.contains(&v.as_str()) {
            return Err(self.err(key, format!("'{v}' is not one of {}", choices.join(", "))));
        }
        self.record(key, v.clone());
        Ok(v)
    }

    /// Comma-separated list; every element must satisfy `ok`.
    pub fn list<T>(&mut self, key: &str, default: &[T], ok: impl Fn(&T) -> bool) -> CliResult<Vec<T>>
    where
        T: FromStr + Display + Clone,
        T::Err: Display,
    {
        let values = match self.take(key) {
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse::<T>().map_err(|e| self.err(key, format!("cannot parse '{s}': {e}")))
                })
                .collect::<CliResult<Vec<T>>>()?,
            None => default.to_vec(),
        };
        if values.is_empty() {
            return Err(self.err(key, "list is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !ok(v)) {
            return Err(self.err(key, format!("value {bad} out of range")));
        }
        let rendered = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.record(key, rendered);
        Ok(values)
    }

    /// Fails on unknown keys; returns the resolved `key = value` pairs.
    pub fn finish(self) -> CliResult<Vec<(String, String)>> {
        if let Some(key) = self.entries.keys().next() {
            return Err(CliError::config(format!("[{}] unknown key '{key}'", self.name)));
        }
        Ok(self.resolved)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let raw = RawConfig::parse("suite = bandit # trailing\n\n[bandit]\nhorizon = 50\n").unwrap();
        assert_eq!(raw.section("").unwrap(), &[("suite".to_string(), "bandit".to_string())]);
        assert_eq!(raw.section("bandit").unwrap()[0].1, "50");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RawConfig::parse("just words").is_err());
        assert!(RawConfig::parse("[bad").is_err());
        assert!(RawConfig::parse("a = 1\na = 2").is_err());
        assert!(RawConfig::parse("[x]\n[x]").is_err());
        assert!(RawConfig::parse("= 3").is_err());
    }

    #[test]
    fn typed_reads_and_unknown_keys() {
        let entries = vec![("n".to_string(), "5".to_string()), ("extra".to_string(), "1".to_string())];
        let mut s = Section::new("t", &entries);
        assert_eq!(s.count("n", 1, 1, 10).unwrap(), 5);
        assert_eq!(s.real("x", 0.5, "positive", |v| v > 0.0).unwrap(), 0.5);
        assert!(s.finish().is_err());

        let entries = vec![("n".to_string(), "50".to_string())];
        let mut s = Section::new("t", &entries);
        assert!(s.count("n", 1, 1, 10).is_err());

        let entries = vec![("l".to_string(), "1, 2,3".to_string())];
        let mut s = Section::new("t", &entries);
        assert_eq!(s.list::<u32>("l", &[], |_| true).unwrap(), vec![1, 2, 3]);
        assert_eq!(s.finish().unwrap(), vec![("l".to_string(), "1,2,3".to_string())]);
    }

    #[test]
    fn render_round_trips() {
        let text = "suite = linreg\n\n[linreg]\ndim = 3\n";
        let raw = RawConfig::parse(text).unwrap();
        assert_eq!(raw.render(), text);
        assert_eq!(RawConfig::parse(&raw.render()).unwrap(), raw);
    }
}

//! Flat `key = value` configuration text, shared by config files, run
//! manifests and checkpoint headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered key/value pairs. Blank lines and lines starting with `#` are ignored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::usage(format!("line {}: empty key", lineno + 1)));
            }
            if kv.entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::usage(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Parses `key` if present.
    pub fn parsed<V: FromStr>(&self, key: &str) -> Result<Option<V>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::usage(format!("invalid value {raw:?} for {key}"))),
        }
    }

    /// Copies every entry of `other` over this one.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::usage(format!(
                "unknown configuration key {k:?} (known: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Comma-separated list, e.g. `1,2,3`.
pub fn parse_list<V: FromStr>(raw: &str, what: &str) -> Result<Vec<V>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::usage(format!("invalid {what} {s:?}"))))
        .collect()
}

pub fn format_list<V: ToString>(values: &[V]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let kv = KeyValues::parse("# run\narch = qccnn2d\n\n lr=0.001 \n").unwrap();
        assert_eq!(kv.get("arch"), Some("qccnn2d"));
        assert_eq!(kv.parsed::<f64>("lr").unwrap(), Some(0.001));
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
    }

    #[test]
    fn malformed_lines() {
        assert!(KeyValues::parse("epochs 3").is_err());
        assert!(KeyValues::parse("= 3").is_err());
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
        let kv = KeyValues::parse("epochs = many").unwrap();
        assert!(kv.parsed::<usize>("epochs").is_err());
        assert!(kv.reject_unknown(&["lr"]).is_err());
        assert!(kv.reject_unknown(&["epochs"]).is_ok());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<u64>("1, 2,3", "seed").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<u64>("1,x", "seed").is_err());
        assert_eq!(format_list(&[4u64, 5]), "4,5");
    }
}

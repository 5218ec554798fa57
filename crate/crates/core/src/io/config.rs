//! Flat `key = value` configuration files.
//!
//! Blank lines and everything after `#` are ignored. Keys are unique.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    source: PathBuf,
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str, source: impl Into<PathBuf>) -> Result<Self> {
        let source = source.into();
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(&source, format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::format(&source, format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::format(&source, format!("line {}: duplicate key {key}", n + 1)));
            }
        }
        Ok(Self { source, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `key` if present.
    pub fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::format(&self.source, format!("{key} = {v}: {e}"))),
        }
    }

    /// Overwrites `target` when `key` is present.
    pub fn read_into<T: FromStr>(&self, key: &str, target: &mut T) -> Result<()>
    where
        T::Err: fmt::Display,
    {
        if let Some(v) = self.value(key)? {
            *target = v;
        }
        Ok(())
    }

    /// Fails on the first key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::format(&self.source, format!("unknown key {k}"))),
            None => Ok(()),
        }
    }

    /// Renders entries in sorted key order.
    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

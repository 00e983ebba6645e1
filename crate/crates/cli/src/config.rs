//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so that typos fail loudly instead of silently using defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "gamma",
    "delta",
    "max_features",
    "doc_cap",
    "merge",
    "seed",
    "n_queries",
    "v_general",
    "v_specialized",
    "general_gazetteer",
    "specialized_gazetteer",
    "ner_backend",
    "embeddings",
    "embed_backend",
    "adapter_url",
    "skip_translation_failures",
    "threads",
    "log_level",
];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    /// Directory that relative paths in the file are resolved against.
    base: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(body: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected key = value", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::config(format!(
                    "config line {}: duplicate key {key:?}",
                    i + 1
                )));
            }
        }
        Ok(ConfigFile { values, base: None })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&body)?;
        cfg.base = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag value if given, else the parsed config value, else `None`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::config(format!("config key {key}: invalid value {v:?}: {e}"))),
        }
    }

    pub fn resolve_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.resolve(flag, key)?.unwrap_or(default))
    }
}

impl ConfigFile {
    /// Like [`ConfigFile::resolve`] for paths; relative config values are
    /// taken relative to the config file.
    pub fn resolve_path(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        Ok(self.raw(key).map(|v| {
            let p = PathBuf::from(v);
            match &self.base {
                Some(base) if p.is_relative() => base.join(p),
                _ => p,
            }
        }))
    }
}

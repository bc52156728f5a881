//! Flat `key = value` experiment configuration.
//!
//! Values are resolved as command-line flag, then config file, then
//! built-in default; every resolved value is recorded so that outputs can
//! echo the full configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Every key a config file may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "lx",
    "ly",
    "jx",
    "jy",
    "evolve_tol",
    "krylov_dim",
    "dense_max_sites",
    "variant",
    "central_row",
    "e_pairs",
    "t_max",
    "t_min",
    "t_steps",
    "bloch_theta",
    "bloch_phi",
    "haar_samples",
    "seed",
    "T",
    "steps",
    "post_select",
    "n_traj",
    "fidelity_target",
    "max_steps",
    "arnoldi_krylov_dim",
    "arnoldi_tol",
    "arnoldi_max_restarts",
    "residual_tol",
    "out",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    #[error("config line {line}: `{key}` must be {expected}")]
    Type { key: String, line: usize, expected: &'static str },

    #[error("`{key}` must be {expected}")]
    Invalid { key: String, expected: String },

    #[error("missing required setting `{0}` (pass --{flag} or set it in the config file)", flag = .0.replace('_', "-"))]
    Missing(String),
}

/// A parsed config file: flat keys with their source line numbers.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, (toml::Value, usize)>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
                || l.strip_prefix(&format!("\"{key}\"")).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map_or(0, |i| i + 1)
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let line = key_line(text, &key);
            if value.is_table() || value.is_array() {
                return Err(ConfigError::Parse { line, message: format!("`{key}` must be a plain value (flat keys only)") });
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { key, line });
            }
            values.insert(key, (value, line));
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }
}

/// Types a config value can be read as.
pub trait ConfigValue: Sized + fmt::Display {
    const EXPECTED: &'static str;
    fn from_toml(v: &toml::Value) -> Option<Self>;
}

impl ConfigValue for f64 {
    const EXPECTED: &'static str = "a number";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
    }
}

impl ConfigValue for usize {
    const EXPECTED: &'static str = "a non-negative integer";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_integer().and_then(|i| usize::try_from(i).ok())
    }
}

impl ConfigValue for u64 {
    const EXPECTED: &'static str = "a non-negative integer";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_integer().and_then(|i| u64::try_from(i).ok())
    }
}

impl ConfigValue for bool {
    const EXPECTED: &'static str = "a boolean";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_bool()
    }
}

impl ConfigValue for String {
    const EXPECTED: &'static str = "a string";
    fn from_toml(v: &toml::Value) -> Option<Self> {
        v.as_str().map(str::to_owned)
    }
}

/// Resolves settings and remembers them in resolution order.
#[derive(Debug, Clone, Default)]
pub struct Resolver {
    file: ConfigFile,
    entries: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Resolver { file, entries: Vec::new() }
    }

    fn lookup<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.values.get(key) {
            Some((v, line)) => T::from_toml(v)
                .map(Some)
                .ok_or(ConfigError::Type { key: key.to_owned(), line: *line, expected: T::EXPECTED }),
            None => Ok(None),
        }
    }

    fn record<T: fmt::Display>(&mut self, key: &str, v: &T) {
        self.entries.push((key.to_owned(), v.to_string()));
    }

    pub fn get<T: ConfigValue>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, ConfigError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn require<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<T, ConfigError> {
        let v = self.lookup(key, flag)?.ok_or_else(|| ConfigError::Missing(key.to_owned()))?;
        self.record(key, &v);
        Ok(v)
    }

    /// Optional setting; recorded as `none` when absent.
    pub fn optional<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, ConfigError> {
        let v = self.lookup(key, flag)?;
        match &v {
            Some(x) => self.record(key, x),
            None => self.record(key, &"none"),
        }
        Ok(v)
    }

    /// Adds a derived or fixed entry to the record.
    pub fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.record(key, &value);
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

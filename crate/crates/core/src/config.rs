//! Flat dotted-key configuration files.
//!
//! Grammar: one `section.key = value` per line, `#` starts a comment,
//! blank lines are ignored. Values keep internal whitespace (lists are
//! whitespace-separated). Keys may not repeat. Relative paths in values
//! resolve against the config file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: missing required key `{key}`")]
    MissingKey { path: String, key: String },
    #[error("{path}:{line}: key `{key}`: {message}")]
    BadValue {
        path: String,
        line: usize,
        key: String,
        message: String,
    },
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// A parsed configuration: ordered key/value pairs plus enough context to
/// produce addressable errors and resolve relative paths.
#[derive(Debug, Clone)]
pub struct Config {
    label: String,
    dir: PathBuf,
    entries: BTreeMap<String, Entry>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        && !key.starts_with('.')
        && !key.ends_with('.')
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, &path.display().to_string(), dir)
    }

    /// Parses config text; `label` names the source in errors and `dir`
    /// anchors relative paths.
    pub fn parse(text: &str, label: &str, dir: PathBuf) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: label.to_string(),
                    line,
                    message: format!("expected `key = value`, got {stripped:?}"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if !valid_key(key) {
                return Err(ConfigError::Syntax {
                    path: label.to_string(),
                    line,
                    message: format!("invalid key {key:?}"),
                });
            }
            if let Some(previous) = entries.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.to_string(),
                },
            ) {
                return Err(ConfigError::Syntax {
                    path: label.to_string(),
                    line,
                    message: format!(
                        "key `{key}` already set on line {}",
                        previous.line
                    ),
                });
            }
        }
        Ok(Self {
            label: label.to_string(),
            dir,
            entries,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn entry(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.entries.get(key).ok_or_else(|| ConfigError::MissingKey {
            path: self.label.clone(),
            key: key.to_string(),
        })
    }

    fn bad(&self, key: &str, line: usize, message: String) -> ConfigError {
        ConfigError::BadValue {
            path: self.label.clone(),
            line,
            key: key.to_string(),
            message,
        }
    }

    /// Raw string value of a required key.
    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        Ok(&self.entry(key)?.value)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let e = self.entry(key)?;
        e.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.bad(key, e.line, format!("{:?} is not a finite number", e.value)))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        if self.contains(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let e = self.entry(key)?;
        e.value
            .parse::<u64>()
            .map_err(|_| self.bad(key, e.line, format!("{:?} is not a non-negative integer", e.value)))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        if self.contains(key) {
            self.u64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        Ok(self.u64(key)? as usize)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn u32_or(&self, key: &str, default: u32) -> Result<u32, ConfigError> {
        let e = match self.entries.get(key) {
            Some(e) => e,
            None => return Ok(default),
        };
        e.value
            .parse::<u32>()
            .map_err(|_| self.bad(key, e.line, format!("{:?} is not a u32", e.value)))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(default);
        };
        match e.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(self.bad(key, e.line, format!("{other:?} is not a boolean"))),
        }
    }

    /// Whitespace-separated list of floats.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let e = self.entry(key)?;
        e.value
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.bad(key, e.line, format!("{tok:?} is not a finite number")))
            })
            .collect()
    }

    /// Whitespace-separated list of words; empty when the key is absent.
    pub fn str_list_or_empty(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    }

    /// Three whitespace-separated floats.
    pub fn vec3(&self, key: &str) -> Result<Vec3, ConfigError> {
        let e = self.entry(key)?;
        let list = self.f64_list(key)?;
        if list.len() != 3 {
            return Err(self.bad(
                key,
                e.line,
                format!("want 3 numbers (x y z), got {}", list.len()),
            ));
        }
        Ok(Vec3::new(list[0], list[1], list[2]))
    }

    pub fn vec3_or(&self, key: &str, default: Vec3) -> Result<Vec3, ConfigError> {
        if self.contains(key) {
            self.vec3(key)
        } else {
            Ok(default)
        }
    }

    /// A path value, resolved against the config file's directory when
    /// relative.
    pub fn path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        let value = self.require(key)?;
        let p = Path::new(value);
        Ok(if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        })
    }

    pub fn path_or(&self, key: &str, default: &str) -> PathBuf {
        let value = self.get(key).unwrap_or(default);
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }
}

//! Layered `key = value` configuration: command-line flags override the
//! optional config file, which overrides built-in defaults. Every value a
//! command reads is recorded so the report can echo the resolved config.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {} is not `key = value`: {raw}", number + 1)))?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(CliError::Config(format!("config line {} has an empty key", number + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("config key `{key}` is set twice")));
        }
    }
    Ok(map)
}

pub fn read_config_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

/// Comma-separated list value.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|item| item.trim().parse::<T>().map_err(|_| format!("bad list item `{}`", item.trim())))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let items: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", items.join(","))
    }
}

pub struct Resolver {
    file: BTreeMap<String, String>,
    flags: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>, flags: Vec<(&str, Option<String>)>) -> Self {
        let flags = flags
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
        Self {
            file,
            flags,
            resolved: BTreeMap::new(),
        }
    }

    fn raw(&self, key: &str) -> Option<&String> {
        self.flags.get(key).or_else(|| self.file.get(key))
    }

    fn parse<T: FromStr>(key: &str, raw: &str) -> CliResult<T> {
        raw.parse::<T>()
            .map_err(|_| CliError::Config(format!("cannot parse `{key}` from `{raw}`")))
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, default: T) -> CliResult<T> {
        let value = match self.raw(key) {
            Some(raw) => Self::parse(key, raw)?,
            None => default,
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str) -> CliResult<Option<T>> {
        let value = match self.raw(key) {
            Some(raw) => Some(Self::parse::<T>(key, raw)?),
            None => None,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Resolved config; rejects file keys and flags the command never asked for.
    pub fn finish(self) -> CliResult<BTreeMap<String, String>> {
        if let Some(key) = self.flags.keys().find(|k| !self.resolved.contains_key(*k)) {
            return Err(CliError::Config(format!(
                "--{} has no effect on this command",
                key.replace('_', "-")
            )));
        }
        if let Some(key) = self.file.keys().find(|k| !self.resolved.contains_key(*k)) {
            return Err(CliError::Config(format!("unknown config key `{key}` for this command")));
        }
        Ok(self.resolved)
    }
}

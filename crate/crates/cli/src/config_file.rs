//! Flat `key=value` config files mirroring the long flags (without `--`).
//! Lines starting with `#` and blank lines are skipped. A key the current
//! subcommand does not understand is a usage error — silently ignoring it
//! would hide typos.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

#[derive(Debug, Default)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    /// Read `path` (when given) and validate every key against `allowed`.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::Usage(format!("cannot read config file '{}': {e}", path.display()))
        })?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::Usage(format!(
                    "config file '{}' line {}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !allowed.contains(&key.as_str()) {
                return Err(Failure::Usage(format!(
                    "config file '{}' line {}: unknown key '{key}' for this subcommand (allowed: {})",
                    path.display(),
                    lineno + 1,
                    allowed.join(", ")
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { map })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Failure::Usage(format!("config key '{key}': cannot parse '{raw}': {e}"))
            }),
        }
    }

    /// Comma-separated list value; empty when the key is absent.
    pub fn get_list(&self, key: &str) -> Vec<String> {
        match self.map.get(key) {
            None => vec![],
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn get_flag(&self, key: &str) -> Result<bool, Failure> {
        match self.map.get(key).map(String::as_str) {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(Failure::Usage(format!(
                "config key '{key}': expected a boolean, got '{other}'"
            ))),
        }
    }
}

/// Flag beats file beats default.
pub fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

/// Flag beats file; may remain unset.
pub fn pick_opt<T>(cli: Option<T>, file: Option<T>) -> Option<T> {
    cli.or(file)
}

/// A non-empty flag list wins wholesale; no element-level merging.
pub fn pick_list(cli: Vec<String>, file: Vec<String>) -> Vec<String> {
    if cli.is_empty() {
        file
    } else {
        cli
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_keys_and_skips_comments() {
        let f = write_config("# comment\n\nlevel = 0.9\nestimators=hck,hc3\n");
        let cfg = FileConfig::load(Some(f.path()), &["level", "estimators"]).unwrap();
        assert_eq!(cfg.get::<f64>("level").unwrap(), Some(0.9));
        assert_eq!(cfg.get_list("estimators"), vec!["hck", "hc3"]);
        assert_eq!(cfg.get::<u64>("seed").unwrap(), None);
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let f = write_config("laevel=0.9\n");
        let err = FileConfig::load(Some(f.path()), &["level"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message().contains("laevel"));
    }

    #[test]
    fn malformed_line_is_usage_error() {
        let f = write_config("just-a-word\n");
        let err = FileConfig::load(Some(f.path()), &["level"]).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.message().contains("line 1"));
    }

    #[test]
    fn flags_beat_file_values() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick::<i32>(None, None, 3), 3);
        assert_eq!(pick_list(vec!["a".into()], vec!["b".into()]), vec!["a"]);
        assert_eq!(pick_list(vec![], vec!["b".into()]), vec!["b"]);
    }
}

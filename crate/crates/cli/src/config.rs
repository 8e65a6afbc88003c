//! Layered run configuration.
//!
//! A run's configuration is one TOML table built from, in increasing
//! priority: verb defaults and preset expansion, the `--config` file, `--set`
//! overrides, then dedicated flags. A manifest written by an earlier run is
//! accepted as a config file; its `[config]` table holds the merged layers
//! and its recorded input checksums are enforced.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::failure::{CliError, CliResult};
use crate::manifest::{Manifest, MANIFEST_FORMAT};

/// The user-supplied layers before defaults are applied.
#[derive(Debug, Default)]
pub struct Layers {
    pub table: Table,
    /// Input checksums that must still hold, keyed by config key.
    pub pinned_inputs: BTreeMap<String, String>,
}

impl Layers {
    pub fn load(path: Option<&Path>, verb: &str) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::ConfigParse(format!("{}: {}", path.display(), one_line(&e))))?;
        if table.get("format").and_then(Value::as_str) != Some(MANIFEST_FORMAT) {
            return Ok(Self { table, ..Self::default() });
        }
        let manifest: Manifest = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::ConfigParse(format!("{}: {}", path.display(), one_line(&e))))?;
        if manifest.verb != verb {
            return Err(CliError::InvalidConfig(format!(
                "{} records a `{}` run, not `{verb}`",
                path.display(),
                manifest.verb
            )));
        }
        let pinned_inputs = manifest.inputs.into_iter().map(|(k, v)| (k, v.sha256)).collect();
        Ok(Self { table: manifest.config, pinned_inputs })
    }

    /// Applies `key=value` overrides. Dotted keys address nested tables;
    /// the value is read as a TOML value and falls back to a plain string.
    pub fn apply_sets(&mut self, sets: &[String]) -> CliResult<()> {
        for raw in sets {
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {raw:?}")))?;
            let key = key.trim();
            if key.is_empty() || key.split('.').any(str::is_empty) {
                return Err(CliError::Usage(format!("--set has an empty key segment in {raw:?}")));
            }
            set_path(&mut self.table, key, parse_value(value.trim()))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: Value) -> CliResult<()> {
        set_path(&mut self.table, key, value)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.table.get(key).and_then(Value::as_str)
    }

    pub fn get_float(&self, key: &str) -> Option<f64> {
        match self.table.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }
}

pub fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for (i, part) in parts.iter().enumerate() {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::ConfigParse(format!(
                    "cannot set {key}: {} is not a table",
                    parts[..=i].join(".")
                )))
            }
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Recursively overlays `top` onto `base`. Tables merge key by key; any
/// other value in `top` replaces the one in `base`.
pub fn deep_merge(base: &mut Table, top: &Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => deep_merge(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

/// Serializes a value into a TOML table.
pub fn to_table<T: serde::Serialize>(value: &T) -> Table {
    match Value::try_from(value).expect("config types serialize to TOML") {
        Value::Table(t) => t,
        other => panic!("expected a table, got {other:?}"),
    }
}

/// Deserializes the merged table into a verb's schema.
pub fn typed<T: DeserializeOwned>(table: Table) -> CliResult<T> {
    Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::ConfigParse(one_line(&e)))
}

fn one_line(e: &toml::de::Error) -> String {
    e.message().replace('\n', " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_values_are_typed_with_string_fallback() {
        assert_eq!(parse_value("3"), Value::Integer(3));
        assert_eq!(parse_value("1e-3"), Value::Float(1e-3));
        assert_eq!(parse_value("true"), Value::Boolean(true));
        assert_eq!(parse_value("[1, 2]"), Value::Array(vec![Value::Integer(1), Value::Integer(2)]));
        assert_eq!(parse_value("rk4"), Value::String("rk4".into()));
        assert_eq!(parse_value("\"rk4\""), Value::String("rk4".into()));
        assert_eq!(parse_value("runs/a.nvds"), Value::String("runs/a.nvds".into()));
    }

    #[test]
    fn dotted_sets_create_nested_tables_and_win() {
        let mut layers = Layers::default();
        layers.table = "seed = 1\n[train]\nepochs = 5\nwidth = 64\n".parse().unwrap();
        layers.apply_sets(&["train.epochs=7".into(), "train.adam.lr=0.01".into(), "seed=9".into()]).unwrap();
        let train = layers.table["train"].as_table().unwrap();
        assert_eq!(train["epochs"].as_integer(), Some(7));
        assert_eq!(train["width"].as_integer(), Some(64));
        assert_eq!(train["adam"]["lr"].as_float(), Some(0.01));
        assert_eq!(layers.table["seed"].as_integer(), Some(9));
    }

    #[test]
    fn malformed_sets_are_rejected() {
        let mut layers = Layers::default();
        assert!(matches!(layers.apply_sets(&["epochs".into()]), Err(CliError::Usage(_))));
        assert!(matches!(layers.apply_sets(&["a..b=1".into()]), Err(CliError::Usage(_))));
        layers.apply_sets(&["a=1".into()]).unwrap();
        assert!(matches!(layers.apply_sets(&["a.b=1".into()]), Err(CliError::ConfigParse(_))));
    }

    #[test]
    fn deep_merge_keeps_untouched_keys() {
        let mut base: Table = "[d]\nx = 1\ny = 2\n[e]\nz = 3\n".parse().unwrap();
        let top: Table = "[d]\ny = 5\n".parse().unwrap();
        deep_merge(&mut base, &top);
        assert_eq!(base["d"]["x"].as_integer(), Some(1));
        assert_eq!(base["d"]["y"].as_integer(), Some(5));
        assert_eq!(base["e"]["z"].as_integer(), Some(3));
    }
}

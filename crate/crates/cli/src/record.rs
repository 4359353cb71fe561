//! Flat results record: a single JSON object whose keys are dotted paths.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Prefix of the keys that echo the resolved configuration.
pub const CONFIG_PREFIX: &str = "config";

/// Finite values as numbers; `+∞` (identical images) as the string `"inf"`.
pub fn metric_value(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v == f64::INFINITY {
        Value::from("inf")
    } else {
        Value::Null
    }
}

pub fn flatten_into(prefix: &str, value: &Value, out: &mut Map<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten_into(&format!("{prefix}.{k}"), v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

pub fn flatten<S: Serialize>(prefix: &str, value: &S) -> Map<String, Value> {
    let mut out = Map::new();
    let v = serde_json::to_value(value).expect("serializable to JSON");
    flatten_into(prefix, &v, &mut out);
    out
}

/// Inverse of [`flatten`] for the keys under `prefix`.
pub fn unflatten<D: DeserializeOwned>(prefix: &str, flat: &Map<String, Value>) -> Result<D, String> {
    let mut root = Map::new();
    let lead = format!("{prefix}.");
    for (key, v) in flat {
        let Some(path) = key.strip_prefix(&lead) else { continue };
        let parts: Vec<&str> = path.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Map::new()));
            node = entry
                .as_object_mut()
                .ok_or_else(|| format!("key {key} conflicts with a scalar entry"))?;
        }
        node.insert(parts[parts.len() - 1].to_string(), v.clone());
    }
    serde_json::from_value(Value::Object(root)).map_err(|e| e.to_string())
}

/// Recovers the configuration echoed in a results record.
pub fn config_from_record(text: &str) -> CliResult<ExperimentConfig> {
    let flat: Map<String, Value> =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("results record: {e}")))?;
    unflatten(CONFIG_PREFIX, &flat).map_err(|e| CliError::Config(format!("results record: {e}")))
}

pub fn to_pretty_json(map: &Map<String, Value>) -> String {
    let mut s = serde_json::to_string_pretty(map).expect("map serializes");
    s.push('\n');
    s
}

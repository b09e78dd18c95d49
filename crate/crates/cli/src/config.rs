//! JSON configs with dotted `--set` overrides.
//!
//! A run manifest is itself a valid config: its `config` object is used as-is.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::failure::{CmdResult, Failure};

pub struct LoadedConfig<T> {
    pub config: T,
    /// Directory relative paths inside the config are resolved against.
    pub base_dir: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path, command: &str, overrides: &[String]) -> CmdResult<LoadedConfig<T>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("{} is not valid JSON: {e}", path.display())))?;
    value = unwrap_manifest(value, command)?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config = serde_json::from_value(value)
        .map_err(|e| Failure::config(format!("invalid {command} config {}: {e}", path.display())))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig { config, base_dir })
}

fn unwrap_manifest(value: Value, command: &str) -> CmdResult<Value> {
    let Value::Object(mut obj) = value else {
        return Err(Failure::config("config must be a JSON object"));
    };
    if let (Some(Value::String(cmd)), true) = (obj.get("command"), obj.contains_key("config")) {
        if cmd != command {
            return Err(Failure::config(format!("manifest was written by `{cmd}`, not `{command}`")));
        }
        return Ok(obj.remove("config").unwrap());
    }
    Ok(Value::Object(obj))
}

/// `a.b.c=value`; the value is parsed as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> CmdResult {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("override `{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Failure::config(format!("override key `{key}` has an empty segment")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let Value::Object(map) = node else {
            return Err(Failure::config(format!("override `{key}` descends into a non-object")));
        };
        node = map.entry(*part).or_insert_with(|| Value::Object(Map::new()));
    }
    let Value::Object(map) = node else {
        return Err(Failure::config(format!("override `{key}` descends into a non-object")));
    };
    map.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

pub fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::path::absolute(&joined).unwrap_or(joined)
}

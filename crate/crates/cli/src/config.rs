//! Flat key-value run configuration.
//!
//! Values are resolved in three layers: built-in defaults, then an optional
//! JSON config file, then command-line flags. Keys unknown to the
//! subcommand are rejected. The resolved document, including the master
//! seed, output directory and format version, is written next to outputs.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use symbreak::data::FORMAT_VERSION;
use symbreak::{Error, Result};

pub const RESOLVED_FILE: &str = "config.resolved.json";
const DEFAULT_OUT: &str = "symbreak-out";
const COMMON_KEYS: [&str; 4] = ["seed", "out", "workers", "format_version"];

#[derive(Debug, Clone, Default, Serialize)]
pub struct CommonFlags {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Resolved<P> {
    pub params: P,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    document: Map<String, Value>,
}

fn as_object(v: Value, what: &str) -> Result<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Config(format!("{what} must be a JSON object"))),
    }
}

pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?;
    as_object(v, "config file")
}

/// Merge defaults, file and flags into the parameter struct `P`.
pub fn resolve<P, F>(
    command: &str,
    file: Option<Map<String, Value>>,
    flags: &F,
    common: &CommonFlags,
) -> Result<Resolved<P>>
where
    P: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut params = as_object(serde_json::to_value(P::default())?, "defaults")?;
    let mut shared = Map::new();
    shared.insert("seed".into(), Value::from(0u64));
    shared.insert("out".into(), Value::from(DEFAULT_OUT));
    shared.insert("workers".into(), Value::Null);

    let mut apply = |layer: Map<String, Value>, source: &str| -> Result<()> {
        for (k, v) in layer {
            if k == "format_version" {
                if v != Value::from(FORMAT_VERSION) {
                    return Err(Error::Config(format!("{source}: unsupported format_version {v}")));
                }
            } else if COMMON_KEYS.contains(&k.as_str()) {
                shared.insert(k, v);
            } else if params.contains_key(&k) {
                params.insert(k, v);
            } else {
                return Err(Error::Config(format!("{source}: unknown key '{k}' for {command}")));
            }
        }
        Ok(())
    };
    if let Some(f) = file {
        apply(f, "config file")?;
    }
    apply(as_object(serde_json::to_value(flags)?, "flags")?, "flags")?;
    apply(as_object(serde_json::to_value(common)?, "flags")?, "flags")?;

    let typed: P = serde_json::from_value(Value::Object(params.clone()))
        .map_err(|e| Error::Config(format!("{command}: {e}")))?;
    let seed = shared["seed"].as_u64().ok_or_else(|| Error::Config("seed must be a non-negative integer".into()))?;
    let out = PathBuf::from(
        shared["out"].as_str().ok_or_else(|| Error::Config("out must be a path string".into()))?,
    );
    let workers = match &shared["workers"] {
        Value::Null => None,
        v => Some(
            v.as_u64()
                .filter(|&w| w > 0)
                .ok_or_else(|| Error::Config("workers must be a positive integer".into()))? as usize,
        ),
    };

    let mut document = Map::new();
    document.insert("format_version".into(), Value::from(FORMAT_VERSION));
    document.insert("command".into(), Value::from(command));
    document.insert("seed".into(), Value::from(seed));
    document.insert("out".into(), Value::from(out.display().to_string()));
    document.insert("workers".into(), workers.map_or(Value::Null, Value::from));
    document.extend(params);
    Ok(Resolved { params: typed, seed, out, workers, document })
}

impl<P> Resolved<P> {
    /// Create the output directory and persist the resolved document.
    pub fn prepare_output(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        let text = serde_json::to_string_pretty(&self.document)?;
        std::fs::write(self.out.join(RESOLVED_FILE), text + "\n")?;
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

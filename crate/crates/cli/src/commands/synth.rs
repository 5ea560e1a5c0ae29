use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symbreak::data::write_dataset;
use symbreak::{Error, Result};

use super::require;
use crate::config::{resolve, CommonFlags};
use crate::datasets::DataSpec;

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SynthArgs {
    /// Generator to sample from.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    /// Number of items.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// File name inside the output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub data: Option<String>,
    pub n: usize,
    pub name: String,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { data: None, n: 1000, name: "dataset.csv".into() }
    }
}

pub fn run(file: Option<Map<String, Value>>, args: &SynthArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<SynthParams, _>("synth", file, args, common)?;
    let p = &r.params;
    let spec = DataSpec::parse(require(&p.data, "data")?)?;
    if matches!(spec, DataSpec::File(_)) {
        return Err(Error::Config("synth needs a generator, not a file".into()));
    }
    if p.name.is_empty() || p.name.contains(['/', '\\']) {
        return Err(Error::Config(format!("name '{}' must be a plain file name", p.name)));
    }
    r.prepare_output()?;
    let ds = spec.generate(p.n, r.seed)?;
    let path = r.path(&p.name);
    write_dataset(&ds, &path)?;
    println!("wrote {} items to {}", ds.len(), path.display());
    Ok(())
}

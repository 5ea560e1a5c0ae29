pub mod detect;
pub mod mmd;
pub mod pvalue;
pub mod ridge;
pub mod synth;
pub mod taskdep;

use serde::{Deserialize, Serialize};
use symbreak::nn::TrainConfig;
use symbreak::{Error, GroupAction, Result};

use crate::config::Resolved;
use crate::datasets::{parse_group, DataSpec};

/// Training settings shared by the classifier-based subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub val_fraction: f64,
}

impl TrainParams {
    pub fn from_config(c: &TrainConfig) -> Self {
        TrainParams {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            patience: c.patience,
            val_fraction: c.val_fraction,
        }
    }

    pub fn to_config(&self, base: &TrainConfig) -> Result<TrainConfig> {
        let c = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            patience: self.patience,
            val_fraction: self.val_fraction,
            ..base.clone()
        };
        c.validate()?;
        Ok(c)
    }
}

pub fn require<'a>(value: &'a Option<String>, key: &str) -> Result<&'a str> {
    value.as_deref().ok_or_else(|| Error::Config(format!("missing required setting '{key}' (flag --{})", key.replace('_', "-"))))
}

pub fn data_and_group(data: &Option<String>, group: &Option<String>) -> Result<(DataSpec, GroupAction)> {
    let data = DataSpec::parse(require(data, "data")?)?;
    let group = parse_group(require(group, "group")?)?;
    Ok((data, group))
}

/// Run `f` on a pool bounded by the resolved worker count.
pub fn with_workers<P, T>(r: &Resolved<P>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match r.workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

pub fn hidden_nonempty(hidden: &[usize]) -> Result<()> {
    if hidden.iter().any(|&w| w == 0) {
        return Err(Error::Config("hidden layer widths must be positive".into()));
    }
    Ok(())
}

use std::io::Write;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symbreak::data::fmt17;
use symbreak::nn::{Head, ModelSpec};
use symbreak::rng::derive_seed;
use symbreak::taskdep::{swiss_roll_row, SwissRollRow, SwissRollTaskConfig};
use symbreak::{Error, Result};

use super::{hidden_nonempty, with_workers, TrainParams};
use crate::config::{resolve, CommonFlags};

pub const CSV_HEADER: &str = "dataset,p,seed,m1,m2,m2_cross_entropy,tt,tf,ft,ff";

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TaskdepArgs {
    /// Lifted fractions to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    /// Replicates per p; replicate k uses seed derive_seed(seed, k).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    /// Vertical offset of the shift group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canonicalizer_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictor_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier_hidden: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskdepParams {
    pub p: Vec<f64>,
    pub replicates: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub shift: f64,
    pub canonicalizer_hidden: Vec<usize>,
    pub pair_hidden: Vec<usize>,
    pub predictor_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for TaskdepParams {
    fn default() -> Self {
        let d = SwissRollTaskConfig::default();
        let t = TrainParams::from_config(&d.train);
        TaskdepParams {
            p: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            replicates: 1,
            n_train: d.n_train,
            n_test: d.n_test,
            shift: d.shift,
            canonicalizer_hidden: d.canonicalizer_hidden,
            pair_hidden: d.pair_spec.hidden,
            predictor_hidden: d.predictor_spec.hidden,
            classifier_hidden: d.classifier_spec.hidden,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            val_fraction: t.val_fraction,
        }
    }
}

impl TaskdepParams {
    fn task_config(&self) -> Result<SwissRollTaskConfig> {
        if self.p.is_empty() || self.replicates == 0 {
            return Err(Error::Config("need at least one p value and one replicate".into()));
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("p = {p} not in [0, 1]")));
        }
        if !(self.shift > 0.0 && self.shift.is_finite()) {
            return Err(Error::Config(format!("shift {} must be positive", self.shift)));
        }
        for h in [&self.canonicalizer_hidden, &self.pair_hidden, &self.predictor_hidden, &self.classifier_hidden] {
            hidden_nonempty(h)?;
        }
        let base = SwissRollTaskConfig::default();
        let train = TrainParams {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            patience: self.patience,
            val_fraction: self.val_fraction,
        }
        .to_config(&base.train)?;
        Ok(SwissRollTaskConfig {
            n_train: self.n_train,
            n_test: self.n_test,
            shift: self.shift,
            canonicalizer_hidden: self.canonicalizer_hidden.clone(),
            pair_spec: ModelSpec::new(self.pair_hidden.clone(), Head::Binary),
            predictor_spec: ModelSpec::new(self.predictor_hidden.clone(), Head::Binary),
            classifier_spec: ModelSpec::new(self.classifier_hidden.clone(), Head::Binary),
            train,
        })
    }
}

fn write_rows(rows: &[SwissRollRow], path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{CSV_HEADER}")?;
    for r in rows {
        let a = &r.accuracies;
        writeln!(
            f,
            "swiss_roll,{},{},{},{},{},{},{},{},{}",
            fmt17(r.p),
            r.seed,
            fmt17(r.m1),
            fmt17(r.m2),
            fmt17(r.m2_cross_entropy),
            fmt17(a.tt),
            fmt17(a.tf),
            fmt17(a.ft),
            fmt17(a.ff)
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn run(file: Option<Map<String, Value>>, args: &TaskdepArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<TaskdepParams, _>("taskdep", file, args, common)?;
    let cfg = r.params.task_config()?;
    r.prepare_output()?;
    let jobs: Vec<(f64, u64)> = r
        .params
        .p
        .iter()
        .flat_map(|&p| (0..r.params.replicates).map(move |k| (p, k as u64)))
        .map(|(p, k)| (p, derive_seed(r.seed, k)))
        .collect();
    let rows = with_workers(&r, || {
        jobs.par_iter().map(|&(p, seed)| swiss_roll_row(p, seed, &cfg)).collect::<Result<Vec<_>>>()
    })?;
    write_rows(&rows, &r.path("taskdep.csv"))?;
    for row in &rows {
        println!(
            "p={:.3} seed={} m1={:.4} m2={:.4} TT={:.4} TF={:.4} FT={:.4} FF={:.4}",
            row.p, row.seed, row.m1, row.m2, row.accuracies.tt, row.accuracies.tf, row.accuracies.ft, row.accuracies.ff
        );
    }
    Ok(())
}

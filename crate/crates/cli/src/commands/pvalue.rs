use std::io::Write;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symbreak::data::fmt17;
use symbreak::hypothesis::{
    compute_pvalue, distance_sweep, write_histogram_csv, DistanceSpec, PValueConfig, PValueSummary, SweepResult,
};
use symbreak::mmd::KernelKind;
use symbreak::nn::{Head, ModelSpec, TrainConfig};
use symbreak::{Error, Result};

use super::{data_and_group, hidden_nonempty, with_workers, TrainParams};
use crate::config::{resolve, write_json, CommonFlags};

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct PvalueArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    /// Distance: naive, chamfer, hausdorff (MMD kernels) or classifier.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Kernel bandwidth; the median heuristic when unset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Calibration rounds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    /// Actual rounds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    /// Items drawn from each split per round (whole splits when unset).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    /// Fraction of items transformed in actual rounds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    /// Also sweep these fractions and write sweep.csv.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    /// Classifier distance: hidden widths.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
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
pub struct PvalueParams {
    pub data: Option<String>,
    pub group: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub kernel: String,
    pub sigma: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    pub subsample: Option<usize>,
    pub fraction: f64,
    pub fractions: Option<Vec<f64>>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for PvalueParams {
    fn default() -> Self {
        let (spec, cfg) = match DistanceSpec::classifier_default() {
            DistanceSpec::Classifier { spec, config } => (spec, config),
            DistanceSpec::Mmd { .. } => unreachable!(),
        };
        let t = TrainParams::from_config(&cfg);
        PvalueParams {
            data: None,
            group: None,
            n_train: 100,
            n_test: 100,
            kernel: KernelKind::Chamfer.to_string(),
            sigma: None,
            n1: 100,
            n2: 10,
            subsample: None,
            fraction: 0.0,
            fractions: None,
            hidden: spec.hidden,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            val_fraction: t.val_fraction,
        }
    }
}

impl PvalueParams {
    fn distance(&self) -> Result<DistanceSpec> {
        if self.kernel.trim().eq_ignore_ascii_case("classifier") {
            if self.sigma.is_some() {
                return Err(Error::Config("sigma applies only to MMD kernels".into()));
            }
            hidden_nonempty(&self.hidden)?;
            let config = TrainParams {
                epochs: self.epochs,
                batch_size: self.batch_size,
                learning_rate: self.learning_rate,
                patience: self.patience,
                val_fraction: self.val_fraction,
            }
            .to_config(&TrainConfig::default())?;
            return Ok(DistanceSpec::Classifier { spec: ModelSpec::new(self.hidden.clone(), Head::Binary), config });
        }
        let kind: KernelKind = self
            .kernel
            .parse()
            .map_err(|_| Error::Config(format!("unknown kernel '{}' (naive, chamfer, hausdorff, classifier)", self.kernel)))?;
        Ok(DistanceSpec::Mmd { kind, sigma: self.sigma })
    }
}

#[derive(Debug, Serialize)]
struct SummaryFile {
    #[serde(flatten)]
    summary: PValueSummary,
    kernel: String,
    sigma: Option<f64>,
    fraction: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_spearman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_non_increasing: Option<bool>,
}

fn write_sweep_csv(sweep: &SweepResult, path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "fraction,mean_distance,p")?;
    for r in &sweep.rows {
        writeln!(f, "{},{},{}", fmt17(r.fraction), fmt17(r.mean_distance), fmt17(r.p))?;
    }
    f.flush()?;
    Ok(())
}

pub fn run(file: Option<Map<String, Value>>, args: &PvalueArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<PvalueParams, _>("pvalue", file, args, common)?;
    let p = &r.params;
    let (data, group) = data_and_group(&p.data, &p.group)?;
    let config = PValueConfig {
        n1: p.n1,
        n2: p.n2,
        subsample: p.subsample,
        distance: p.distance()?,
        augmented_fraction: p.fraction,
    };
    config.validate()?;
    if let Some(fs) = &p.fractions {
        if fs.is_empty() || fs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config("fractions must be a non-empty list in [0, 1]".into()));
        }
    }
    r.prepare_output()?;
    let (train, test) = data.splits(p.n_train, p.n_test, r.seed)?;
    let (result, sweep) = with_workers(&r, || {
        let result = compute_pvalue(&train, &test, &group, &config, r.seed)?;
        let sweep = match &p.fractions {
            Some(fs) => Some(distance_sweep(&train, &test, &group, &config, fs, r.seed)?),
            None => None,
        };
        Ok((result, sweep))
    })?;
    write_histogram_csv(&result, &r.path("histogram.csv"))?;
    if let Some(s) = &sweep {
        write_sweep_csv(s, &r.path("sweep.csv"))?;
    }
    write_json(
        &r.path("summary.json"),
        &SummaryFile {
            summary: PValueSummary::from(&result),
            kernel: p.kernel.clone(),
            sigma: result.sigma,
            fraction: p.fraction,
            seed: r.seed,
            sweep_spearman: sweep.as_ref().map(|s| s.spearman),
            sweep_non_increasing: sweep.as_ref().map(|s| s.non_increasing),
        },
    )?;
    println!("p = {:.6} (mean actual distance {:.6}, {} calibration rounds)", result.p, result.mean_actual, p.n1);
    Ok(())
}

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symbreak::classifier::task_independent_metric;
use symbreak::nn::{write_curve_csv, Head, ModelSpec, TrainConfig};
use symbreak::Result;

use super::{data_and_group, hidden_nonempty, with_workers, TrainParams};
use crate::config::{resolve, write_json, CommonFlags};

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DetectArgs {
    /// Dataset to test.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    /// Candidate symmetry group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    /// Hidden layer widths, comma separated.
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
pub struct DetectParams {
    pub data: Option<String>,
    pub group: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        let t = TrainParams::from_config(&TrainConfig::default());
        DetectParams {
            data: None,
            group: None,
            n_train: 2000,
            n_test: 2000,
            hidden: ModelSpec::default_binary().hidden,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            patience: t.patience,
            val_fraction: t.val_fraction,
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricFile {
    m: f64,
    n_train: usize,
    n_test: usize,
    seed: u64,
    tp: usize,
    tn: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
}

pub fn run(file: Option<Map<String, Value>>, args: &DetectArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<DetectParams, _>("detect", file, args, common)?;
    let p = &r.params;
    let (data, group) = data_and_group(&p.data, &p.group)?;
    hidden_nonempty(&p.hidden)?;
    let cfg = TrainParams {
        epochs: p.epochs,
        batch_size: p.batch_size,
        learning_rate: p.learning_rate,
        patience: p.patience,
        val_fraction: p.val_fraction,
    }
    .to_config(&TrainConfig::default())?;
    let spec = ModelSpec::new(p.hidden.clone(), Head::Binary);
    r.prepare_output()?;
    let (train, test) = data.splits(p.n_train, p.n_test, r.seed)?;
    let metric = with_workers(&r, || task_independent_metric(&train, &test, &group, &spec, &cfg, r.seed))?;
    write_curve_csv(&metric.curve, &r.path("curve.csv"))?;
    let c = metric.confusion;
    write_json(
        &r.path("metric.json"),
        &MetricFile {
            m: metric.test_accuracy,
            n_train: train.len(),
            n_test: test.len(),
            seed: r.seed,
            tp: c.tp,
            tn: c.tn,
            fp: c.fp,
            fn_: c.fn_,
        },
    )?;
    println!("m = {:.4} ({} train / {} test items)", metric.test_accuracy, train.len(), test.len());
    Ok(())
}

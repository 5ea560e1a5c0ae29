//! Monte Carlo p-values for the hypothesis that a dataset is invariant under
//! a group.
//!
//! Each round draws train/test subsamples without replacement. Calibration
//! rounds transform every item, so both subsamples follow the symmetrized
//! distribution; actual rounds transform only a fraction of the items. A
//! round's distance compares the train subsample with a freshly transformed
//! copy of the test subsample, so large distances indicate asymmetry. The
//! p-value counts calibration distances strictly above the mean actual
//! distance: `p = (1 + count) / (1 + n1)`.

use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::binary_train_eval;
use crate::data::{fmt17, LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::groups::GroupAction;
use crate::mmd::{self, KernelKind, KernelSpec};
use crate::nn::{ModelSpec, TrainConfig};
use crate::rng::{derive_seed, rng_from_seed, SeededRng};
use crate::stats;
use crate::synthdata::build_detection_dataset;

/// Pairs drawn for the median bandwidth heuristic.
pub const MEDIAN_PAIRS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistanceSpec {
    /// MMD with a fixed bandwidth, or the median heuristic when `sigma` is
    /// `None` (evaluated once on the pooled raw data).
    Mmd { kind: KernelKind, sigma: Option<f64> },
    /// Test accuracy of an original-vs-transformed classifier.
    Classifier { spec: ModelSpec, config: TrainConfig },
}

impl DistanceSpec {
    /// Classifier distance with a 20 epoch budget.
    pub fn classifier_default() -> Self {
        DistanceSpec::Classifier {
            spec: ModelSpec::default_binary(),
            config: TrainConfig { epochs: 20, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueConfig {
    pub n1: usize,
    pub n2: usize,
    /// Items drawn from each split per round; `None` uses whole splits.
    pub subsample: Option<usize>,
    pub distance: DistanceSpec,
    /// Fraction of items transformed in actual rounds (1.0 is the null).
    pub augmented_fraction: f64,
}

impl PValueConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("n1 and n2 must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.augmented_fraction) {
            return Err(Error::Config(format!("augmented fraction {} not in [0,1]", self.augmented_fraction)));
        }
        if self.subsample == Some(0) {
            return Err(Error::Config("subsample size must be positive".into()));
        }
        if let DistanceSpec::Mmd { sigma: Some(s), .. } = self.distance {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("bandwidth {s} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueResult {
    pub p: f64,
    pub calibration: Vec<f64>,
    pub actual: Vec<f64>,
    pub mean_actual: f64,
    /// Bandwidth used by MMD distances.
    pub sigma: Option<f64>,
}

/// `(1 + #{c > mean_actual}) / (1 + len(calibration))`.
pub fn exceedance_p(calibration: &[f64], mean_actual: f64) -> f64 {
    let count = calibration.iter().filter(|&&c| c > mean_actual).count();
    (1 + count) as f64 / (1 + calibration.len()) as f64
}

enum ResolvedDistance<'a> {
    Mmd(KernelSpec),
    Classifier(&'a ModelSpec, &'a TrainConfig),
}

fn transform_all(group: &GroupAction, items: &mut [Sample], rng: &mut SeededRng) -> Result<()> {
    for s in items.iter_mut() {
        let g = group.haar_sample(rng);
        *s = group.apply(&g, s)?;
    }
    Ok(())
}

fn transform_fraction(group: &GroupAction, items: &mut [Sample], fraction: f64, rng: &mut SeededRng) -> Result<()> {
    let k = (fraction * items.len() as f64).round() as usize;
    let mut chosen = index::sample(rng, items.len(), k.min(items.len())).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let g = group.haar_sample(rng);
        items[i] = group.apply(&g, &items[i])?;
    }
    Ok(())
}

fn draw(ds: &LabeledDataset, size: usize, rng: &mut SeededRng) -> LabeledDataset {
    if size == ds.len() {
        return ds.clone();
    }
    let mut idx = index::sample(rng, ds.len(), size).into_vec();
    idx.shuffle(rng);
    ds.subset(&idx)
}

fn round_distance(
    train: &LabeledDataset,
    test: &LabeledDataset,
    group: &GroupAction,
    dist: &ResolvedDistance<'_>,
    size: (usize, usize),
    fraction: Option<f64>,
    seed: u64,
) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let mut a = draw(train, size.0, &mut rng);
    let mut b = draw(test, size.1, &mut rng);
    match fraction {
        None => {
            transform_all(group, &mut a.items, &mut rng)?;
            transform_all(group, &mut b.items, &mut rng)?;
        }
        Some(f) => {
            transform_fraction(group, &mut a.items, f, &mut rng)?;
            transform_fraction(group, &mut b.items, f, &mut rng)?;
        }
    }
    match dist {
        ResolvedDistance::Mmd(spec) => {
            transform_all(group, &mut b.items, &mut rng)?;
            Ok(mmd::mmd(&a.items, &b.items, spec)?.value)
        }
        ResolvedDistance::Classifier(spec, cfg) => {
            let det_seed = rng_seed(&mut rng);
            let det = build_detection_dataset(&a, &b, group, det_seed)?;
            let cfg = TrainConfig { seed: derive_seed(det_seed, cfg.seed), ..(*cfg).clone() };
            Ok(binary_train_eval(&det.train, &det.test, spec, &cfg)?.0.test_accuracy)
        }
    }
}

fn rng_seed(rng: &mut SeededRng) -> u64 {
    use rand::Rng;
    rng.random()
}

/// Run `n1` calibration and `n2` actual rounds and return the p-value.
/// Round `i` uses seed `derive_seed(seed, i)`, calibration rounds first, so
/// results do not depend on the number of worker threads.
pub fn compute_pvalue(
    train: &LabeledDataset,
    test: &LabeledDataset,
    group: &GroupAction,
    config: &PValueConfig,
    seed: u64,
) -> Result<PValueResult> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset("p-value input split".into()));
    }
    let size = match config.subsample {
        None => (train.len(), test.len()),
        Some(s) if s <= train.len() && s <= test.len() => (s, s),
        Some(s) => {
            return Err(Error::Config(format!(
                "subsample {s} exceeds available data ({} train, {} test)",
                train.len(),
                test.len()
            )))
        }
    };
    let (dist, sigma) = match &config.distance {
        DistanceSpec::Mmd { kind, sigma } => {
            let s = match sigma {
                Some(s) => *s,
                None => {
                    let pooled: Vec<Sample> = train.items.iter().chain(&test.items).cloned().collect();
                    mmd::median_bandwidth(*kind, &pooled, MEDIAN_PAIRS, derive_seed(seed, u64::MAX))?
                }
            };
            (ResolvedDistance::Mmd(KernelSpec::new(*kind, s)?), Some(s))
        }
        DistanceSpec::Classifier { spec, config } => (ResolvedDistance::Classifier(spec, config), None),
    };

    let n1 = config.n1;
    let distances: Vec<f64> = (0..n1 + config.n2)
        .into_par_iter()
        .map(|i| {
            let fraction = if i < n1 { None } else { Some(config.augmented_fraction) };
            round_distance(train, test, group, &dist, size, fraction, derive_seed(seed, i as u64)).map_err(|e| {
                let (kind, round) = if i < n1 { ("calibration", i) } else { ("actual", i - n1) };
                Error::Round { kind, round, source: Box::new(e) }
            })
        })
        .collect::<Result<_>>()?;
    let (calibration, actual) = distances.split_at(n1);
    let mean_actual = stats::mean(actual);
    Ok(PValueResult {
        p: exceedance_p(calibration, mean_actual),
        calibration: calibration.to_vec(),
        actual: actual.to_vec(),
        mean_actual,
        sigma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub mean_distance: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Rank correlation between fraction and mean actual distance.
    pub spearman: f64,
    /// Whether the mean distance never increases along the sorted fractions.
    pub non_increasing: bool,
}

/// `compute_pvalue` for each augmented fraction, all with the same seed.
pub fn distance_sweep(
    train: &LabeledDataset,
    test: &LabeledDataset,
    group: &GroupAction,
    config: &PValueConfig,
    fractions: &[f64],
    seed: u64,
) -> Result<SweepResult> {
    if fractions.is_empty() {
        return Err(Error::Config("empty fraction list".into()));
    }
    let mut rows = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let cfg = PValueConfig { augmented_fraction: f, ..config.clone() };
        let r = compute_pvalue(train, test, group, &cfg, seed)?;
        rows.push(SweepRow { fraction: f, mean_distance: r.mean_actual, p: r.p });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_distance).collect();
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.fraction.total_cmp(&b.fraction));
    let non_increasing = sorted.windows(2).all(|w| w[1].mean_distance <= w[0].mean_distance);
    Ok(SweepResult { spearman: stats::spearman(&xs, &ys), rows, non_increasing })
}

/// Rows `round,kind,distance` for both round kinds.
pub fn write_histogram_csv(result: &PValueResult, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "round,kind,distance")?;
    for (i, d) in result.calibration.iter().enumerate() {
        writeln!(f, "{i},calibration,{}", fmt17(*d))?;
    }
    for (i, d) in result.actual.iter().enumerate() {
        writeln!(f, "{i},actual,{}", fmt17(*d))?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSummary {
    pub p: f64,
    pub n1: usize,
    pub n2: usize,
    pub mean_actual: f64,
}

impl From<&PValueResult> for PValueSummary {
    fn from(r: &PValueResult) -> Self {
        PValueSummary { p: r.p, n1: r.calibration.len(), n2: r.actual.len(), mean_actual: r.mean_actual }
    }
}

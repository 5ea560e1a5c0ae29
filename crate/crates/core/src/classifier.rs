//! Detection classifier and the task-independent asymmetry metric.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::groups::GroupAction;
use crate::mmd::exact_sum;
use crate::nn::{self, EpochRecord, Mlp, ModelSpec, Targets, TrainConfig};
use crate::rng::derive_seed;
use crate::synthdata::{build_detection_dataset, OrbitDistribution};

/// Binary confusion counts with label 1 as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(pred: &[usize], truth: &[f64]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == 1, t > 0.5) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub test_accuracy: f64,
    pub curve: Vec<EpochRecord>,
    pub confusion: Confusion,
}

/// Fixed-width layout for turning samples into MLP inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_points: usize,
    pub point_dim: usize,
    pub with_mask: bool,
}

impl FeatureLayout {
    /// Smallest layout covering every item of the given datasets.
    pub fn covering(sets: &[&LabeledDataset]) -> Result<Self> {
        let mut n_points = 0;
        let mut point_dim = None;
        let mut with_mask = false;
        for ds in sets {
            for s in &ds.items {
                match point_dim {
                    None => point_dim = Some(s.dim),
                    Some(d) if d != s.dim => return Err(Error::Dimension { expected: d, got: s.dim }),
                    _ => {}
                }
                n_points = n_points.max(s.n_points());
                with_mask |= s.mask.is_some();
            }
        }
        let point_dim = point_dim.ok_or_else(|| Error::EmptyDataset("featurization".into()))?;
        let sizes_vary = sets.iter().flat_map(|d| &d.items).any(|s| s.n_points() != n_points);
        Ok(FeatureLayout { n_points, point_dim, with_mask: with_mask || sizes_vary })
    }

    pub fn width(&self) -> usize {
        self.n_points * self.point_dim + if self.with_mask { self.n_points } else { 0 }
    }
}

/// Valid points sorted lexicographically, flattened, zero padded, followed by
/// the padded validity mask when the layout carries one.
pub fn featurize(sample: &Sample, layout: &FeatureLayout) -> Result<Vec<f64>> {
    if sample.dim != layout.point_dim {
        return Err(Error::Dimension { expected: layout.point_dim, got: sample.dim });
    }
    if sample.n_points() > layout.n_points {
        return Err(Error::Dimension { expected: layout.n_points, got: sample.n_points() });
    }
    let mut pts: Vec<&[f64]> = sample.valid_points().collect();
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Vec::with_capacity(layout.width());
    for p in &pts {
        out.extend_from_slice(p);
    }
    out.resize(layout.n_points * layout.point_dim, 0.0);
    if layout.with_mask {
        out.extend((0..layout.n_points).map(|i| if i < pts.len() { 1.0 } else { 0.0 }));
    }
    Ok(out)
}

pub fn feature_matrix(ds: &LabeledDataset, layout: &FeatureLayout) -> Result<DMatrix<f64>> {
    let w = layout.width();
    let mut flat = Vec::with_capacity(ds.len() * w);
    for s in &ds.items {
        flat.extend(featurize(s, layout)?);
    }
    Ok(DMatrix::from_row_slice(ds.len(), w, &flat))
}

/// Fit a binary classifier on `train` and score it on `test`.
pub fn binary_train_eval(
    train: &LabeledDataset,
    test: &LabeledDataset,
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<(MetricResult, Mlp)> {
    let layout = FeatureLayout::covering(&[train, test])?;
    let x = feature_matrix(train, &layout)?;
    let out = nn::train(spec, &x, &Targets::Binary(train.labels.clone()), config)?;
    let xt = feature_matrix(test, &layout)?;
    let pred = out.model.predict_class(&xt)?;
    let confusion = Confusion::from_predictions(&pred, &test.labels);
    Ok((MetricResult { test_accuracy: confusion.accuracy(), curve: out.curve, confusion }, out.model))
}

/// Held-out accuracy of a classifier separating original samples from
/// randomly transformed ones.
///
/// `seed` drives the halving and transforms; the network is trained with
/// `derive_seed(seed, config.seed)` so that distinct `seed`s also give
/// distinct initializations.
pub fn task_independent_metric(
    raw_train: &LabeledDataset,
    raw_test: &LabeledDataset,
    group: &GroupAction,
    spec: &ModelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<MetricResult> {
    let det = build_detection_dataset(raw_train, raw_test, group, seed)?;
    let cfg = TrainConfig { seed: derive_seed(seed, config.seed), ..config.clone() };
    Ok(binary_train_eval(&det.train, &det.test, spec, &cfg)?.0)
}

/// Best achievable detection accuracy for data supported on one orbit with
/// weights `theta`, `1 - 1/2 Σ min(1/r, θ_i)`.
///
/// Computed as `1/2 Σ max(1/r, θ_i)` with a correctly rounded sum; the two
/// expressions agree whenever `θ` sums to one.
pub fn optimal_orbit_accuracy(dist: &OrbitDistribution) -> f64 {
    let u = 1.0 / dist.r() as f64;
    0.5 * exact_sum(dist.theta.iter().map(|&t| t.max(u)))
}

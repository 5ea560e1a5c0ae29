//! Task-dependent asymmetry metrics.
//!
//! A canonicalizer assigns each input the group element that minimizes a
//! fixed scorer over its transformed copies. The detection metric m1 is the
//! held-out accuracy of a classifier telling matched `(c(x), f(x))` pairs
//! from mismatched `(c(x), f(x'))` pairs. The direct metric m2 is the gap
//! between the mismatched and matched losses of a predictor `c(x) -> f(x)`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::{feature_matrix, featurize, Confusion, FeatureLayout};
use crate::data::{LabelSpace, LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::groups::{GroupAction, GroupElement};
use crate::nn::{self, EpochRecord, Head, Mlp, ModelSpec, Targets, TrainConfig};
use crate::rng::{derive_seed, substream};
use crate::synthdata::swiss_roll;

/// Tolerance of the exact affine relation between the two optima.
pub const AFFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonMode {
    FrozenRandom,
    TrainedJointly,
}

#[derive(Debug, Clone)]
pub struct Canonicalizer {
    pub scorer: Mlp,
    pub group: GroupAction,
    pub layout: FeatureLayout,
    pub mode: CanonMode,
    elements: Vec<GroupElement>,
    inverses: Vec<GroupElement>,
}

impl Canonicalizer {
    /// Untrained scorer with He-initialized weights. An empty `hidden` list
    /// gives a linear scorer.
    pub fn frozen_random(group: &GroupAction, layout: FeatureLayout, hidden: Vec<usize>, seed: u64) -> Result<Self> {
        let scorer = Mlp::init(layout.width(), &ModelSpec::new(hidden, Head::Regression(1)), &mut substream(seed, 0))?;
        Self::with_scorer(group, layout, scorer, CanonMode::FrozenRandom)
    }

    pub fn with_scorer(group: &GroupAction, layout: FeatureLayout, scorer: Mlp, mode: CanonMode) -> Result<Self> {
        if mode == CanonMode::TrainedJointly {
            return Err(Error::Config("jointly trained canonicalizers are not available".into()));
        }
        if scorer.input_dim() != layout.width() || scorer.head != Head::Regression(1) {
            return Err(Error::Config("scorer must map the feature layout to one real output".into()));
        }
        let elements = group.elements()?;
        let inverses = elements.iter().map(|g| group.inverse(g)).collect::<Result<_>>()?;
        Ok(Canonicalizer { scorer, group: group.clone(), layout, mode, elements, inverses })
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    /// Scores of `g^{-1} x` for every element in enumeration order.
    pub fn scores(&self, x: &Sample) -> Result<Vec<f64>> {
        let mut flat = Vec::with_capacity(self.elements.len() * self.layout.width());
        for inv in &self.inverses {
            flat.extend(featurize(&self.group.apply(inv, x)?, &self.layout)?);
        }
        let m = DMatrix::from_row_slice(self.elements.len(), self.layout.width(), &flat);
        Ok(self.scorer.predict(&m)?.column(0).iter().copied().collect())
    }

    /// Index of the minimizing element; ties go to the earliest element.
    pub fn canonical_index(&self, x: &Sample) -> Result<usize> {
        let s = self.scores(x)?;
        let mut best = 0;
        for (i, &v) in s.iter().enumerate().skip(1) {
            if v < s[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn canonicalize(&self, x: &Sample) -> Result<GroupElement> {
        Ok(self.elements[self.canonical_index(x)?].clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDepResult {
    pub m1: f64,
    pub m2: f64,
    /// m2 with cross-entropy in place of the 0/1 loss (class labels only).
    pub m2_cross_entropy: Option<f64>,
    pub m1_curve: Vec<EpochRecord>,
    pub m2_curve: Vec<EpochRecord>,
}

fn one_hot(k: usize, at: usize, out: &mut Vec<f64>) {
    out.extend((0..k).map(|i| if i == at { 1.0 } else { 0.0 }));
}

fn label_classes(ds: &LabeledDataset) -> Option<usize> {
    match ds.label_space {
        LabelSpace::Binary => Some(2),
        LabelSpace::Classes(k) => Some(k),
        _ => None,
    }
}

fn encode_label(ds: &LabeledDataset, i: usize, out: &mut Vec<f64>) {
    match label_classes(ds) {
        Some(k) => one_hot(k, ds.class_label(i), out),
        None => out.push(ds.labels[i]),
    }
}

/// Seeded half/half split of a labeled dataset.
fn halves(data: &LabeledDataset, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if data.len() < 4 {
        return Err(Error::EmptyDataset("task-dependent metrics need at least four items".into()));
    }
    if data.label_space == LabelSpace::Unlabeled {
        return Err(Error::Config("task-dependent metrics need labels".into()));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut substream(seed, 10));
    let (a, b) = idx.split_at(data.len() / 2);
    Ok((data.subset(a), data.subset(b)))
}

/// Matched rows (target 0) followed by mismatched rows (target 1), with the
/// partner of each mismatched row given by a seeded permutation.
fn pair_rows(ds: &LabeledDataset, canon: &[usize], r: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let n = ds.len();
    let mut partner: Vec<usize> = (0..n).collect();
    partner.shuffle(&mut substream(seed, 11));
    let mut flat = Vec::new();
    for i in 0..n {
        one_hot(r, canon[i], &mut flat);
        encode_label(ds, i, &mut flat);
    }
    for i in 0..n {
        one_hot(r, canon[i], &mut flat);
        encode_label(ds, partner[i], &mut flat);
    }
    let width = flat.len() / (2 * n);
    let y = (0..2 * n).map(|i| if i < n { 0.0 } else { 1.0 }).collect();
    (DMatrix::from_row_slice(2 * n, width, &flat), y)
}

fn canonical_indices(ds: &LabeledDataset, c: &Canonicalizer) -> Result<Vec<usize>> {
    ds.items.iter().map(|x| c.canonical_index(x)).collect()
}

/// Matched versus mismatched `(c(x), f(x))` pairs; returns the held-out
/// accuracy of the pair classifier.
pub fn detection_metric_m1(
    data: &LabeledDataset,
    c: &Canonicalizer,
    spec: &ModelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<TaskDepResult> {
    let (train, test) = halves(data, seed)?;
    let r = c.elements().len();
    let (x, y) = pair_rows(&train, &canonical_indices(&train, c)?, r, derive_seed(seed, 1));
    let (xt, yt) = pair_rows(&test, &canonical_indices(&test, c)?, r, derive_seed(seed, 2));
    let cfg = TrainConfig { seed: derive_seed(seed, config.seed), ..config.clone() };
    let out = nn::train(spec, &x, &Targets::Binary(y), &cfg)?;
    let m1 = Confusion::from_predictions(&out.model.predict_class(&xt)?, &yt).accuracy();
    Ok(TaskDepResult { m1, m2: f64::NAN, m2_cross_entropy: None, m1_curve: out.curve, m2_curve: Vec::new() })
}

fn canon_features(canon: &[usize], r: usize) -> DMatrix<f64> {
    let mut flat = Vec::with_capacity(canon.len() * r);
    for &g in canon {
        one_hot(r, g, &mut flat);
    }
    DMatrix::from_row_slice(canon.len(), r, &flat)
}

/// Predict `f(x)` from one-hot `c(x)`; m2 is the held-out mismatched loss
/// minus the matched loss. Class labels use the 0/1 loss, real labels the
/// squared error.
pub fn direct_metric_m2(
    data: &LabeledDataset,
    c: &Canonicalizer,
    spec: &ModelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<TaskDepResult> {
    let (train, test) = halves(data, seed)?;
    let r = c.elements().len();
    let x = canon_features(&canonical_indices(&train, c)?, r);
    let xt = canon_features(&canonical_indices(&test, c)?, r);
    let mut partner: Vec<usize> = (0..test.len()).collect();
    partner.shuffle(&mut substream(seed, 12));
    let cfg = TrainConfig { seed: derive_seed(seed, config.seed), ..config.clone() };

    match label_classes(data) {
        Some(k) => {
            let spec = ModelSpec { head: Head::Classes(k), ..spec.clone() };
            let labels: Vec<usize> = (0..train.len()).map(|i| train.class_label(i)).collect();
            let out = nn::train(&spec, &x, &Targets::Classes(labels), &cfg)?;
            let truth: Vec<usize> = (0..test.len()).map(|i| test.class_label(i)).collect();
            let shuffled: Vec<usize> = partner.iter().map(|&j| truth[j]).collect();
            let pred = out.model.predict_class(&xt)?;
            let err = |t: &[usize]| pred.iter().zip(t).filter(|(p, t)| p != t).count() as f64 / t.len() as f64;
            let ce_matched = out.model.loss(&xt, &Targets::Classes(truth.clone()))?;
            let ce_mismatched = out.model.loss(&xt, &Targets::Classes(shuffled.clone()))?;
            Ok(TaskDepResult {
                m1: f64::NAN,
                m2: err(&shuffled) - err(&truth),
                m2_cross_entropy: Some(ce_mismatched - ce_matched),
                m1_curve: Vec::new(),
                m2_curve: out.curve,
            })
        }
        None => {
            let spec = ModelSpec { head: Head::Regression(1), ..spec.clone() };
            let y = DMatrix::from_column_slice(train.len(), 1, &train.labels);
            let out = nn::train(&spec, &x, &Targets::Real(y), &cfg)?;
            let yt = DMatrix::from_column_slice(test.len(), 1, &test.labels);
            let shuffled: Vec<f64> = partner.iter().map(|&j| test.labels[j]).collect();
            let ys = DMatrix::from_column_slice(test.len(), 1, &shuffled);
            let m2 = out.model.loss(&xt, &Targets::Real(ys))? - out.model.loss(&xt, &Targets::Real(yt))?;
            Ok(TaskDepResult { m1: f64::NAN, m2, m2_cross_entropy: None, m1_curve: Vec::new(), m2_curve: out.curve })
        }
    }
}

/// Both metrics on the same data and canonicalizer.
pub fn task_dependent_metrics(
    data: &LabeledDataset,
    c: &Canonicalizer,
    pair_spec: &ModelSpec,
    predictor_spec: &ModelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<TaskDepResult> {
    let a = detection_metric_m1(data, c, pair_spec, config, derive_seed(seed, 100))?;
    let b = direct_metric_m2(data, c, predictor_spec, config, derive_seed(seed, 101))?;
    Ok(TaskDepResult { m1: a.m1, m1_curve: a.m1_curve, ..b })
}

/// Joint distribution of (group element, label) on a finite grid; rows are
/// elements, columns labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    pub probs: DMatrix<f64>,
}

impl DiscreteJoint {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.is_empty() || probs.len() > 10_000 {
            return Err(Error::InvalidDistribution(format!("joint has {} cells", probs.len())));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution("negative or non-finite mass".into()));
        }
        let total = crate::mmd::exact_sum(probs.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(DiscreteJoint { probs })
    }

    /// Product of the marginals.
    pub fn independent_part(&self) -> DMatrix<f64> {
        let pg: Vec<f64> = self.probs.row_iter().map(|r| r.sum()).collect();
        let py: Vec<f64> = self.probs.column_iter().map(|c| c.sum()).collect();
        DMatrix::from_fn(self.probs.nrows(), self.probs.ncols(), |i, j| pg[i] * py[j])
    }
}

/// Exact optima of both metrics on a discrete joint.
///
/// The best pair classifier calls a pair matched exactly where the joint
/// mass exceeds the product mass, giving `m1* = 1/2 + 1/2 Σ (J - Q)_+`.
/// The best predictor picks, per element, the label maximizing `J - Q`,
/// giving `m2* = Σ_g max_y (J - Q)`.
pub fn bayes_task_optima(joint: &DiscreteJoint) -> (f64, f64) {
    let q = joint.independent_part();
    let diff = &joint.probs - q;
    let pos = crate::mmd::exact_sum(diff.iter().map(|&v| v.max(0.0)));
    let m1 = 0.5 + 0.5 * pos;
    let m2 = crate::mmd::exact_sum(diff.row_iter().map(|r| r.max()));
    (m1, m2)
}

/// Optima plus the check `m2* = 2 m1* - 1`.
pub fn affine_relation_check(joint: &DiscreteJoint) -> Result<(f64, f64)> {
    let (m1, m2) = bayes_task_optima(joint);
    let gap = (m2 - (2.0 * m1 - 1.0)).abs();
    if gap > AFFINE_TOL {
        return Err(Error::AffineRelation { m1, m2, gap });
    }
    Ok((m1, m2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationAccuracies {
    /// Augmented training, augmented testing.
    pub tt: f64,
    pub tf: f64,
    pub ft: f64,
    pub ff: f64,
}

fn augment(ds: &LabeledDataset, group: &GroupAction, seed: u64) -> Result<LabeledDataset> {
    let mut rng = substream(seed, 20);
    let mut out = ds.clone();
    for s in out.items.iter_mut() {
        let g = group.haar_sample(&mut rng);
        *s = group.apply(&g, s)?;
    }
    Ok(out)
}

/// Label-prediction accuracy with and without random transforms of the
/// training and test inputs (first letter: training, second: testing).
pub fn augmentation_accuracies(
    train: &LabeledDataset,
    test: &LabeledDataset,
    group: &GroupAction,
    spec: &ModelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<AugmentationAccuracies> {
    let k = label_classes(train).ok_or_else(|| Error::Config("augmentation accuracies need class labels".into()))?;
    let train_aug = augment(train, group, derive_seed(seed, 1))?;
    let test_aug = augment(test, group, derive_seed(seed, 2))?;
    let layout = FeatureLayout::covering(&[train, test, &train_aug, &test_aug])?;
    let head = if k == 2 { Head::Binary } else { Head::Classes(k) };
    let spec = ModelSpec { head, ..spec.clone() };
    let targets = |ds: &LabeledDataset| {
        if k == 2 {
            Targets::Binary(ds.labels.clone())
        } else {
            Targets::Classes((0..ds.len()).map(|i| ds.class_label(i)).collect())
        }
    };
    let fit = |ds: &LabeledDataset, s: u64| -> Result<Mlp> {
        let cfg = TrainConfig { seed: derive_seed(seed, s ^ config.seed), ..config.clone() };
        Ok(nn::train(&spec, &feature_matrix(ds, &layout)?, &targets(ds), &cfg)?.model)
    };
    let plain = fit(train, 3)?;
    let augmented = fit(&train_aug, 4)?;
    let acc = |m: &Mlp, ds: &LabeledDataset| -> Result<f64> { m.score(&feature_matrix(ds, &layout)?, &targets(ds)) };
    Ok(AugmentationAccuracies {
        tt: acc(&augmented, &test_aug)?,
        tf: acc(&augmented, test)?,
        ft: acc(&plain, &test_aug)?,
        ff: acc(&plain, test)?,
    })
}

/// Settings for one swiss-roll row of the task-dependent sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwissRollTaskConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub shift: f64,
    pub canonicalizer_hidden: Vec<usize>,
    pub pair_spec: ModelSpec,
    pub predictor_spec: ModelSpec,
    pub classifier_spec: ModelSpec,
    pub train: TrainConfig,
}

impl Default for SwissRollTaskConfig {
    fn default() -> Self {
        SwissRollTaskConfig {
            n_train: 2000,
            n_test: 2000,
            shift: 1.0,
            canonicalizer_hidden: Vec::new(),
            pair_spec: ModelSpec::new(vec![32, 32], Head::Binary),
            predictor_spec: ModelSpec::new(vec![32], Head::Binary),
            classifier_spec: ModelSpec::new(vec![16, 16], Head::Binary),
            train: TrainConfig { epochs: 50, learning_rate: 3e-3, patience: 50, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwissRollRow {
    pub p: f64,
    pub seed: u64,
    pub m1: f64,
    pub m2: f64,
    pub m2_cross_entropy: f64,
    pub accuracies: AugmentationAccuracies,
}

/// m1, m2 and the four augmentation accuracies for one `p` and seed. The
/// canonicalizer is a frozen random scorer on the 3D point.
pub fn swiss_roll_row(p: f64, seed: u64, cfg: &SwissRollTaskConfig) -> Result<SwissRollRow> {
    let group = GroupAction::VerticalShift { offset: cfg.shift };
    let data = swiss_roll(cfg.n_train + cfg.n_test, p, derive_seed(seed, 1))?;
    let (train, test) = data.split_at(cfg.n_train);
    let layout = FeatureLayout::covering(&[&data])?;
    let canon = Canonicalizer::frozen_random(&group, layout, cfg.canonicalizer_hidden.clone(), derive_seed(seed, 2))?;
    let td = task_dependent_metrics(&data, &canon, &cfg.pair_spec, &cfg.predictor_spec, &cfg.train, derive_seed(seed, 3))?;
    let accuracies = augmentation_accuracies(&train, &test, &group, &cfg.classifier_spec, &cfg.train, derive_seed(seed, 4))?;
    Ok(SwissRollRow {
        p,
        seed,
        m1: td.m1,
        m2: td.m2,
        m2_cross_entropy: td.m2_cross_entropy.unwrap_or(f64::NAN),
        accuracies,
    })
}

//! Dense feed-forward networks trained with Adam.
//!
//! Hidden layers use ReLU, the output layer is linear. The loss depends on
//! the head: binary cross-entropy on a single logit, softmax cross-entropy
//! over class logits, or mean squared error for real-valued targets. Inputs
//! are standardized with statistics of the training split, stored in the
//! model.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{fmt17, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Binary,
    Classes(usize),
    Regression(usize),
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Binary => 1,
            Head::Classes(k) | Head::Regression(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    pub head: Head,
}

impl ModelSpec {
    /// Four hidden layers of 128 units.
    pub fn default_binary() -> Self {
        ModelSpec { hidden: vec![128; 4], head: Head::Binary }
    }

    pub fn new(hidden: Vec<usize>, head: Head) -> Self {
        ModelSpec { hidden, head }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub val_fraction: f64,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            val_fraction: 0.2,
            patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.patience == 0 {
            return Err(Error::Config("batch size, learning rate and patience must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("validation fraction {} not in (0,1)", self.val_fraction)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("invalid optimizer constants".into()));
        }
        Ok(())
    }
}

/// Training targets, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Binary(Vec<f64>),
    Classes(Vec<usize>),
    Real(DMatrix<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Binary(v) => v.len(),
            Targets::Classes(v) => v.len(),
            Targets::Real(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Binary(v) => Targets::Binary(idx.iter().map(|&i| v[i]).collect()),
            Targets::Classes(v) => Targets::Classes(idx.iter().map(|&i| v[i]).collect()),
            Targets::Real(m) => Targets::Real(m.select_rows(idx)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub head: Head,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// He-initialized network (`std = sqrt(2 / fan_in)`, zero biases).
    pub fn init<R: Rng + ?Sized>(input_dim: usize, spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        if input_dim == 0 || spec.hidden.contains(&0) || spec.head.outputs() == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut widths = vec![input_dim];
        widths.extend(&spec.hidden);
        widths.push(spec.head.outputs());
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in widths.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            weights.push(DMatrix::from_fn(w[0], w[1], |_, _| std * rng.sample::<f64, _>(StandardNormal)));
            biases.push(DVector::zeros(w[1]));
        }
        Ok(Mlp {
            widths,
            weights,
            biases,
            head: spec.head,
            input_mean: vec![0.0; input_dim],
            input_scale: vec![1.0; input_dim],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// `sum (w_i + 1) w_{i+1}`.
    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn set_standardization(&mut self, x: &DMatrix<f64>) {
        let n = x.nrows().max(1) as f64;
        for j in 0..x.ncols() {
            let col = x.column(j);
            let m = col.sum() / n;
            let v = col.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
            self.input_mean[j] = m;
            self.input_scale[j] = if v > 1e-24 { 1.0 / v.sqrt() } else { 1.0 };
        }
    }

    fn standardize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for j in 0..z.ncols() {
            let (m, s) = (self.input_mean[j], self.input_scale[j]);
            for v in z.column_mut(j).iter_mut() {
                *v = (*v - m) * s;
            }
        }
        z
    }

    /// Pre-activations of every layer for already standardized inputs.
    fn forward_raw(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = &h * w;
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
            if l + 1 < self.weights.len() {
                h = z.map(|v| v.max(0.0));
            }
            pre.push(z);
        }
        pre
    }

    /// Output logits (or real predictions), one row per input row.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), got: x.ncols() });
        }
        Ok(self.forward_raw(&self.standardize(x)).pop().expect("at least one layer"))
    }

    /// Predicted class per row (binary: logit > 0).
    pub fn predict_class(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        let out = self.predict(x)?;
        Ok(out
            .row_iter()
            .map(|r| match self.head {
                Head::Binary => usize::from(r[0] > 0.0),
                _ => r.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc }).0,
            })
            .collect())
    }

    /// Loss and output gradient `dL/dz` for a batch of outputs.
    fn loss_grad(&self, out: &DMatrix<f64>, t: &Targets) -> Result<(f64, DMatrix<f64>)> {
        let b = out.nrows() as f64;
        let mut g = DMatrix::zeros(out.nrows(), out.ncols());
        let mut loss = 0.0;
        match (self.head, t) {
            (Head::Binary, Targets::Binary(y)) => {
                for i in 0..out.nrows() {
                    let z = out[(i, 0)];
                    loss += softplus(z) - y[i] * z;
                    g[(i, 0)] = (sigmoid(z) - y[i]) / b;
                }
            }
            (Head::Classes(k), Targets::Classes(y)) => {
                for i in 0..out.nrows() {
                    let row = out.row(i);
                    let m = row.max();
                    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                    if y[i] >= k {
                        return Err(Error::Config(format!("class label {} >= {k}", y[i])));
                    }
                    loss += lse - row[y[i]];
                    for c in 0..k {
                        let p = (row[c] - lse).exp();
                        g[(i, c)] = (p - f64::from(u8::from(c == y[i]))) / b;
                    }
                }
            }
            (Head::Regression(k), Targets::Real(y)) => {
                if y.ncols() != k {
                    return Err(Error::Dimension { expected: k, got: y.ncols() });
                }
                for i in 0..out.nrows() {
                    for c in 0..k {
                        let e = out[(i, c)] - y[(i, c)];
                        loss += e * e;
                        g[(i, c)] = 2.0 * e / b;
                    }
                }
            }
            _ => return Err(Error::Config("targets do not match the output head".into())),
        }
        Ok((loss / b, g))
    }

    /// Mean loss and parameter gradients on standardized inputs.
    pub fn loss_and_gradients(&self, x: &DMatrix<f64>, t: &Targets) -> Result<(f64, Gradients)> {
        let pre = self.forward_raw(x);
        let (loss, mut delta) = self.loss_grad(pre.last().expect("layer"), t)?;
        let layers = self.weights.len();
        let mut gw = vec![DMatrix::zeros(0, 0); layers];
        let mut gb = vec![DVector::zeros(0); layers];
        for l in (0..layers).rev() {
            let input = if l == 0 { x.clone() } else { pre[l - 1].map(|v| v.max(0.0)) };
            gw[l] = input.transpose() * &delta;
            gb[l] = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if l > 0 {
                let mut back = &delta * self.weights[l].transpose();
                back.zip_apply(&pre[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((loss, Gradients { weights: gw, biases: gb }))
    }

    /// Mean loss on raw (unstandardized) inputs.
    pub fn loss(&self, x: &DMatrix<f64>, t: &Targets) -> Result<f64> {
        let out = self.predict(x)?;
        Ok(self.loss_grad(&out, t)?.0)
    }

    /// Accuracy for classification heads, negative MSE for regression.
    pub fn score(&self, x: &DMatrix<f64>, t: &Targets) -> Result<f64> {
        if t.is_empty() {
            return Ok(f64::NAN);
        }
        match t {
            Targets::Binary(y) => {
                let pred = self.predict_class(x)?;
                Ok(pred.iter().zip(y).filter(|(p, y)| **p == usize::from(**y > 0.5)).count() as f64 / y.len() as f64)
            }
            Targets::Classes(y) => {
                let pred = self.predict_class(x)?;
                Ok(pred.iter().zip(y).filter(|(p, y)| p == y).count() as f64 / y.len() as f64)
            }
            Targets::Real(_) => Ok(-self.loss(x, t)?),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            widths: self.widths.clone(),
            head: self.head,
            layers: self
                .weights
                .iter()
                .zip(&self.biases)
                .map(|(w, b)| LayerRecord {
                    rows: w.nrows(),
                    cols: w.ncols(),
                    weights: w.transpose().as_slice().to_vec(),
                    bias: b.as_slice().to_vec(),
                })
                .collect(),
            input_mean: self.input_mean.clone(),
            input_scale: self.input_scale.clone(),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", c.format_version)));
        }
        if c.layers.len() + 1 != c.widths.len() {
            return Err(Error::Config("checkpoint layer count does not match widths".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, rec) in c.layers.iter().enumerate() {
            if rec.rows != c.widths[l] || rec.cols != c.widths[l + 1] || rec.weights.len() != rec.rows * rec.cols || rec.bias.len() != rec.cols {
                return Err(Error::Config(format!("checkpoint layer {l} has inconsistent shape")));
            }
            weights.push(DMatrix::from_row_slice(rec.rows, rec.cols, &rec.weights));
            biases.push(DVector::from_vec(rec.bias.clone()));
        }
        Ok(Mlp {
            widths: c.widths.clone(),
            weights,
            biases,
            head: c.head,
            input_mean: c.input_mean.clone(),
            input_scale: c.input_scale.clone(),
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(f), &self.to_checkpoint())?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_checkpoint(&serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// Serialized model: layer shapes plus row-major weight arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub widths: Vec<usize>,
    pub head: Head,
    pub layers: Vec<LayerRecord>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

struct Adam {
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<DVector<f64>>,
    v_b: Vec<DVector<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &Mlp) -> Self {
        let zw = |w: &DMatrix<f64>| DMatrix::zeros(w.nrows(), w.ncols());
        Adam {
            m_w: model.weights.iter().map(zw).collect(),
            v_w: model.weights.iter().map(zw).collect(),
            m_b: model.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            v_b: model.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut Mlp, g: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = cfg.learning_rate;
        let eps = cfg.eps;
        let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        for l in 0..model.weights.len() {
            update(model.weights[l].as_mut_slice(), self.m_w[l].as_mut_slice(), self.v_w[l].as_mut_slice(), g.weights[l].as_slice());
            update(model.biases[l].as_mut_slice(), self.m_b[l].as_mut_slice(), self.v_b[l].as_mut_slice(), g.biases[l].as_slice());
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub curve: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
}

fn check_classes(t: &Targets, head: Head) -> Result<()> {
    let counts: Vec<usize> = match (t, head) {
        (Targets::Binary(y), Head::Binary) => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Config("binary targets must be 0 or 1".into()));
            }
            let ones = y.iter().filter(|&&v| v == 1.0).count();
            vec![y.len() - ones, ones]
        }
        (Targets::Classes(y), Head::Classes(k)) => {
            let mut c = vec![0; k];
            for &v in y {
                if v >= k {
                    return Err(Error::Config(format!("class label {v} >= {k}")));
                }
                c[v] += 1;
            }
            c
        }
        (Targets::Real(_), Head::Regression(_)) => return Ok(()),
        _ => return Err(Error::Config("targets do not match the output head".into())),
    };
    if counts.iter().filter(|&&c| c >= 2).count() < 2 {
        return Err(Error::DegenerateDataset("need at least two classes with two examples each".into()));
    }
    Ok(())
}

/// Mini-batch Adam on `x` (one row per example). A seeded random
/// `val_fraction` of the rows is held out; the returned model is the one with
/// the best validation score, and training stops after `patience` epochs
/// without improvement.
pub fn train(spec: &ModelSpec, x: &DMatrix<f64>, targets: &Targets, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.nrows() != targets.len() {
        return Err(Error::Dimension { expected: x.nrows(), got: targets.len() });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset("training set".into()));
    }
    check_classes(targets, spec.head)?;

    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(cfg.seed, 0));
    let n_val = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, fit_idx) = order.split_at(n_val);
    let x_fit = x.select_rows(fit_idx);
    let t_fit = targets.subset(fit_idx);
    let x_val = x.select_rows(val_idx);
    let t_val = targets.subset(val_idx);

    let mut model = Mlp::init(x.ncols(), spec, &mut substream(cfg.seed, 1))?;
    model.set_standardization(&x_fit);
    let z_fit = model.standardize(&x_fit);

    let mut best = model.clone();
    let mut best_score = model.score(&x_val, &t_val)?;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut curve = Vec::new();
    let mut adam = Adam::new(&model);
    let mut rng = rng_from_seed(crate::rng::derive_seed(cfg.seed, 2));
    let mut idx: Vec<usize> = (0..fit_idx.len()).collect();

    for epoch in 1..=cfg.epochs {
        idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in idx.chunks(cfg.batch_size) {
            let xb = z_fit.select_rows(batch);
            let tb = t_fit.subset(batch);
            let (loss, grads) = model.loss_and_gradients(&xb, &tb)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut model, &grads, cfg);
        }
        let train_loss = total / idx.len() as f64;
        let train_acc = model.score(&x_fit, &t_fit)?;
        let val_acc = model.score(&x_val, &t_val)?;
        curve.push(EpochRecord { epoch, train_loss, train_acc, val_acc });
        if val_acc > best_score {
            best_score = val_acc;
            best = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { model: best, curve, best_epoch })
}

/// Write `epoch,train_loss,train_acc,val_acc` rows.
pub fn write_curve_csv(curve: &[EpochRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,train_loss,train_acc,val_acc")?;
    for r in curve {
        writeln!(f, "{},{},{},{}", r.epoch, fmt17(r.train_loss), fmt17(r.train_acc), fmt17(r.val_acc))?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, sep: f64, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = rng_from_seed(seed);
        let mut x = DMatrix::zeros(n, 2);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as f64;
            let c = if label == 1.0 { sep } else { -sep };
            x[(i, 0)] = c + rng.sample::<f64, _>(StandardNormal);
            x[(i, 1)] = c + rng.sample::<f64, _>(StandardNormal);
            y.push(label);
        }
        (x, y)
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 32, learning_rate: 3e-3, seed: 3, ..TrainConfig::default() }
    }

    fn finite_difference_check(model: &Mlp, x: &DMatrix<f64>, t: &Targets) {
        let (_, g) = model.loss_and_gradients(x, t).unwrap();
        let h = 1e-5;
        for l in 0..model.weights.len() {
            for idx in 0..model.weights[l].len() {
                let mut plus = model.clone();
                plus.weights[l].as_mut_slice()[idx] += h;
                let mut minus = model.clone();
                minus.weights[l].as_mut_slice()[idx] -= h;
                let num = (plus.loss_and_gradients(x, t).unwrap().0 - minus.loss_and_gradients(x, t).unwrap().0) / (2.0 * h);
                let ana = g.weights[l].as_slice()[idx];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(rel < 1e-4, "layer {l} weight {idx}: {num} vs {ana}");
            }
            for idx in 0..model.biases[l].len() {
                let mut plus = model.clone();
                plus.biases[l][idx] += h;
                let mut minus = model.clone();
                minus.biases[l][idx] -= h;
                let num = (plus.loss_and_gradients(x, t).unwrap().0 - minus.loss_and_gradients(x, t).unwrap().0) / (2.0 * h);
                let ana = g.biases[l][idx];
                let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
                assert!(rel < 1e-4, "layer {l} bias {idx}: {num} vs {ana}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng_from_seed(1);
        let x = DMatrix::from_fn(7, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        for (head, t) in [
            (Head::Binary, Targets::Binary(vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0])),
            (Head::Classes(3), Targets::Classes(vec![0, 2, 1, 1, 0, 2, 2])),
            (Head::Regression(2), Targets::Real(DMatrix::from_fn(7, 2, |i, j| (i + j) as f64 * 0.1))),
        ] {
            let mut model = Mlp::init(3, &ModelSpec::new(vec![5, 4], head), &mut rng).unwrap();
            for b in &mut model.biases {
                for v in b.iter_mut() {
                    *v = 0.1 * rng.sample::<f64, _>(StandardNormal);
                }
            }
            finite_difference_check(&model, &x, &t);
        }
    }

    #[test]
    fn parameter_count_formula() {
        let m = Mlp::init(3, &ModelSpec::new(vec![5, 4], Head::Classes(2)), &mut rng_from_seed(0)).unwrap();
        assert_eq!(m.parameter_count(), 4 * 5 + 6 * 4 + 5 * 2);
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(600, 3.0, 2);
        let spec = ModelSpec::new(vec![16, 16], Head::Binary);
        let out = train(&spec, &x, &Targets::Binary(y), &small_cfg(30)).unwrap();
        let (xt, yt) = blobs(1000, 3.0, 9);
        assert!(out.model.score(&xt, &Targets::Binary(yt)).unwrap() >= 0.99);
    }

    #[test]
    fn random_labels_give_chance() {
        let (x, _) = blobs(600, 0.0, 4);
        let mut rng = rng_from_seed(5);
        let y: Vec<f64> = (0..600).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        let spec = ModelSpec::new(vec![16], Head::Binary);
        let out = train(&spec, &x, &Targets::Binary(y), &small_cfg(20)).unwrap();
        let (xt, _) = blobs(2000, 0.0, 6);
        let yt: Vec<f64> = (0..2000).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        let acc = out.model.score(&xt, &Targets::Binary(yt)).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (x, y) = blobs(100, 1.0, 7);
        let out = train(&ModelSpec::new(vec![4], Head::Binary), &x, &Targets::Binary(y), &small_cfg(0)).unwrap();
        assert!(out.curve.is_empty());
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn deterministic_training() {
        let (x, y) = blobs(200, 1.0, 8);
        let spec = ModelSpec::new(vec![8, 8], Head::Binary);
        let a = train(&spec, &x, &Targets::Binary(y.clone()), &small_cfg(5)).unwrap();
        let b = train(&spec, &x, &Targets::Binary(y), &small_cfg(5)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn single_class_is_degenerate() {
        let (x, _) = blobs(50, 1.0, 1);
        let r = train(&ModelSpec::new(vec![4], Head::Binary), &x, &Targets::Binary(vec![1.0; 50]), &small_cfg(3));
        assert!(matches!(r, Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let (x, _) = blobs(64, 1.0, 1);
        let t = Targets::Real(DMatrix::from_element(64, 1, 1e300));
        let cfg = TrainConfig { learning_rate: 1.0, ..small_cfg(3) };
        let r = train(&ModelSpec::new(vec![4], Head::Regression(1)), &x, &t, &cfg);
        assert!(matches!(r, Err(Error::Divergence { epoch: 1 })), "{r:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Mlp::init(3, &ModelSpec::new(vec![5], Head::Classes(3)), &mut rng_from_seed(2)).unwrap();
        let dir = std::env::temp_dir().join(format!("symbreak-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("m.json");
        m.save_json(&p).unwrap();
        assert_eq!(Mlp::load_json(&p).unwrap(), m);
        let _ = std::fs::remove_dir_all(&dir);
    }
}

//! Samples, labeled datasets and their on-disk format.
//!
//! A [`Sample`] is a small point cloud stored row-major: `coords.len() ==
//! n_points * dim`. A plain feature vector is a cloud with a single point.
//! Variable-size clouds carry a per-point validity mask; masked-out rows are
//! padding and never contribute to any computation.
//!
//! On disk a dataset is a flat CSV (`id,label,c0..,m0..`) plus a JSON sidecar
//! holding the shape metadata and `format_version`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub coords: Vec<f64>,
    pub dim: usize,
    pub mask: Option<Vec<bool>>,
}

impl Sample {
    pub fn vector(v: Vec<f64>) -> Self {
        let dim = v.len();
        Sample { coords: v, dim, mask: None }
    }

    pub fn cloud(coords: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "ragged point cloud");
        Sample { coords, dim, mask: None }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.n_points(), "mask length");
        self.mask = Some(mask);
        self
    }

    pub fn n_points(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[i])
    }

    /// Iterator over unmasked points.
    pub fn valid_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_points()).filter(|&i| self.is_valid(i)).map(move |i| self.point(i))
    }

    pub fn n_valid(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|&&b| b).count(),
            None => self.n_points(),
        }
    }

    /// Pad with zero rows up to `n` points, masking the padding out.
    pub fn padded(&self, n: usize) -> Sample {
        let have = self.n_points();
        assert!(n >= have);
        let mut coords = self.coords.clone();
        coords.resize(n * self.dim, 0.0);
        let mut mask = self.mask.clone().unwrap_or_else(|| vec![true; have]);
        mask.resize(n, false);
        Sample { coords, dim: self.dim, mask: Some(mask) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpace {
    Unlabeled,
    Binary,
    Classes(usize),
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub items: Vec<Sample>,
    /// Class indices are stored as exact small integers.
    pub labels: Vec<f64>,
    pub label_space: LabelSpace,
}

impl LabeledDataset {
    pub fn new(items: Vec<Sample>, labels: Vec<f64>, label_space: LabelSpace) -> Self {
        assert_eq!(items.len(), labels.len());
        LabeledDataset { items, labels, label_space }
    }

    pub fn unlabeled(items: Vec<Sample>) -> Self {
        let n = items.len();
        LabeledDataset { items, labels: vec![0.0; n], label_space: LabelSpace::Unlabeled }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            items: idx.iter().map(|&i| self.items[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            label_space: self.label_space,
        }
    }

    /// Split into the first `n` items and the rest.
    pub fn split_at(&self, n: usize) -> (LabeledDataset, LabeledDataset) {
        let a: Vec<usize> = (0..n).collect();
        let b: Vec<usize> = (n..self.len()).collect();
        (self.subset(&a), self.subset(&b))
    }

    pub fn max_points(&self) -> usize {
        self.items.iter().map(Sample::n_points).max().unwrap_or(0)
    }

    pub fn point_dim(&self) -> usize {
        self.items.first().map_or(0, |s| s.dim)
    }

    pub fn has_mask(&self) -> bool {
        self.items.iter().any(|s| s.mask.is_some())
    }

    pub fn class_label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub n_items: usize,
    pub point_dim: usize,
    pub max_points: usize,
    pub label_space: LabelSpace,
    pub has_mask: bool,
}

fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

/// Write `<path>` (CSV) and `<path>.json` (sidecar, same stem).
///
/// Clouds smaller than the largest one are zero-padded and their mask bits
/// record which rows are real.
pub fn write_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let dim = ds.point_dim();
    let maxp = ds.max_points();
    if ds.items.iter().any(|s| s.dim != dim) {
        return Err(Error::Config("all items must share a point dimension".into()));
    }
    let has_mask = ds.has_mask() || ds.items.iter().any(|s| s.n_points() != maxp);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..maxp * dim).map(|k| format!("c{k}")));
    if has_mask {
        header.extend((0..maxp).map(|k| format!("m{k}")));
    }
    w.write_record(&header)?;
    for (i, (s, &y)) in ds.items.iter().zip(&ds.labels).enumerate() {
        let p = if has_mask { s.padded(maxp) } else { s.clone() };
        let mut rec = vec![i.to_string(), fmt17(y)];
        rec.extend(p.coords.iter().map(|&v| fmt17(v)));
        if has_mask {
            let m = p.mask.as_ref().expect("padded has mask");
            rec.extend(m.iter().map(|&b| if b { "1".to_string() } else { "0".to_string() }));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let meta = DatasetMeta {
        format_version: FORMAT_VERSION,
        n_items: ds.len(),
        point_dim: dim,
        max_points: maxp,
        label_space: ds.label_space,
        has_mask,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported dataset format_version {}",
            meta.format_version
        )));
    }
    let ncoord = meta.max_points * meta.point_dim;
    let mut r = csv::Reader::from_path(path)?;
    let mut items = Vec::with_capacity(meta.n_items);
    let mut labels = Vec::with_capacity(meta.n_items);
    for rec in r.records() {
        let rec = rec?;
        let want = 2 + ncoord + if meta.has_mask { meta.max_points } else { 0 };
        if rec.len() != want {
            return Err(Error::Parse(format!("row has {} fields, expected {want}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        labels.push(num(&rec[1])?);
        let coords = (0..ncoord).map(|k| num(&rec[2 + k])).collect::<Result<Vec<_>>>()?;
        let mut s = Sample::cloud(coords, meta.point_dim.max(1));
        if meta.has_mask {
            let mask = (0..meta.max_points).map(|k| &rec[2 + ncoord + k] == "1").collect();
            s = s.with_mask(mask);
        }
        items.push(s);
    }
    if items.len() != meta.n_items {
        return Err(Error::Parse(format!(
            "sidecar declares {} items, CSV has {}",
            meta.n_items,
            items.len()
        )));
    }
    Ok(LabeledDataset::new(items, labels, meta.label_space))
}

/// Fixed 17-significant-digit float formatting used by every CSV writer.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v:.16e}")
}

//! Biased (V-statistic) maximum mean discrepancy between sets of point
//! clouds, with three kernels:
//!
//! * naive: embedding `[mean, flatten(sum x x^T / count)]` (uncentered second
//!   moment), `k = exp(-|e_x - e_y|^2 / sigma)`;
//! * chamfer: `c = (mean d1 + mean d2) / 2` over unsquared nearest-neighbour
//!   distances, `k = exp(-c / (2 sigma^2))`;
//! * hausdorff: as chamfer with `max` in place of `mean`.
//!
//! Masked-out points never enter any computation, so a padded cloud with its
//! padding masked gives bit-identical results to the unpadded cloud. Sums of
//! kernel values are exactly rounded, which makes them independent of
//! evaluation order and makes `mmd(X, X)` exactly zero.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Naive,
    Chamfer,
    Hausdorff,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Naive, KernelKind::Chamfer, KernelKind::Hausdorff];
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Naive => "naive",
            KernelKind::Chamfer => "chamfer",
            KernelKind::Hausdorff => "hausdorff",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" | "meancov" | "mean_cov" => Ok(KernelKind::Naive),
            "chamfer" => Ok(KernelKind::Chamfer),
            "hausdorff" => Ok(KernelKind::Hausdorff),
            other => Err(Error::Parse(format!("unknown kernel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        Ok(KernelSpec { kind, sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdResult {
    pub value: f64,
    pub xx_mean: f64,
    pub yy_mean: f64,
    pub xy_mean: f64,
}

/// Exactly rounded floating-point sum (Shewchuk partials).
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // Round the expansion to the nearest double.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        n -= 1;
        let x = hi;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

fn nonempty(x: &Sample) -> Result<()> {
    if x.n_valid() == 0 {
        Err(Error::EmptyCloud)
    } else {
        Ok(())
    }
}

/// `[mean, flatten(sum x x^T / count)]` over valid points.
pub fn naive_embedding(x: &Sample) -> Result<Vec<f64>> {
    nonempty(x)?;
    let d = x.dim;
    let count = x.n_valid() as f64;
    let mut e = vec![0.0; d + d * d];
    for p in x.valid_points() {
        for a in 0..d {
            e[a] += p[a];
            for b in 0..d {
                e[d + a * d + b] += p[a] * p[b];
            }
        }
    }
    for v in &mut e {
        *v /= count;
    }
    Ok(e)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Nearest-neighbour distances from each valid point of `x` to `y`.
fn nearest(x: &Sample, y: &Sample) -> Vec<f64> {
    x.valid_points()
        .map(|p| y.valid_points().map(|q| sq_dist(p, q)).fold(f64::INFINITY, f64::min).sqrt())
        .collect()
}

fn check_dims(x: &Sample, y: &Sample) -> Result<()> {
    if x.dim != y.dim {
        return Err(Error::Dimension { expected: x.dim, got: y.dim });
    }
    nonempty(x)?;
    nonempty(y)
}

/// Squared embedding distance used by the naive kernel.
pub fn naive_distance(x: &Sample, y: &Sample) -> Result<f64> {
    check_dims(x, y)?;
    Ok(sq_dist(&naive_embedding(x)?, &naive_embedding(y)?))
}

pub fn chamfer_distance(x: &Sample, y: &Sample) -> Result<f64> {
    check_dims(x, y)?;
    let (d1, d2) = (nearest(x, y), nearest(y, x));
    Ok(0.5 * (stats::mean(&d1) + stats::mean(&d2)))
}

pub fn hausdorff_distance(x: &Sample, y: &Sample) -> Result<f64> {
    check_dims(x, y)?;
    let max = |v: Vec<f64>| v.into_iter().fold(0.0f64, f64::max);
    Ok(max(nearest(x, y)).max(max(nearest(y, x))))
}

pub fn kernel_naive(x: &Sample, y: &Sample, sigma: f64) -> Result<f64> {
    Ok((-naive_distance(x, y)? / sigma).exp())
}

pub fn kernel_chamfer(x: &Sample, y: &Sample, sigma: f64) -> Result<f64> {
    Ok((-chamfer_distance(x, y)? / (2.0 * sigma * sigma)).exp())
}

pub fn kernel_hausdorff(x: &Sample, y: &Sample, sigma: f64) -> Result<f64> {
    Ok((-hausdorff_distance(x, y)? / (2.0 * sigma * sigma)).exp())
}

/// Base distance of a kernel, before exponentiation.
pub fn base_distance(kind: KernelKind, x: &Sample, y: &Sample) -> Result<f64> {
    match kind {
        KernelKind::Naive => naive_distance(x, y),
        KernelKind::Chamfer => chamfer_distance(x, y),
        KernelKind::Hausdorff => hausdorff_distance(x, y),
    }
}

fn exponentiate(spec: &KernelSpec, dist: f64) -> f64 {
    match spec.kind {
        KernelKind::Naive => (-dist / spec.sigma).exp(),
        _ => (-dist / (2.0 * spec.sigma * spec.sigma)).exp(),
    }
}

pub fn kernel(spec: &KernelSpec, x: &Sample, y: &Sample) -> Result<f64> {
    Ok(exponentiate(spec, base_distance(spec.kind, x, y)?))
}

/// Per-item data reused across all pairs.
enum Prepared<'a> {
    Embedding(Vec<f64>),
    Cloud(&'a Sample),
}

fn prepare<'a>(spec: &KernelSpec, xs: &'a [Sample]) -> Result<Vec<Prepared<'a>>> {
    xs.iter()
        .map(|x| match spec.kind {
            KernelKind::Naive => naive_embedding(x).map(Prepared::Embedding),
            _ => nonempty(x).map(|_| Prepared::Cloud(x)),
        })
        .collect()
}

fn pair_kernel(spec: &KernelSpec, a: &Prepared, b: &Prepared) -> Result<f64> {
    let dist = match (a, b) {
        (Prepared::Embedding(u), Prepared::Embedding(v)) => {
            if u.len() != v.len() {
                return Err(Error::Dimension { expected: u.len(), got: v.len() });
            }
            sq_dist(u, v)
        }
        (Prepared::Cloud(x), Prepared::Cloud(y)) => base_distance(spec.kind, x, y)?,
        _ => unreachable!("both sides prepared with one spec"),
    };
    Ok(exponentiate(spec, dist))
}

/// Exactly rounded `2 * sum_{i<j} k_ij + sum_i k_ii` over one set.
fn within_sum(spec: &KernelSpec, p: &[Prepared]) -> Result<f64> {
    let rows: Vec<Vec<f64>> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(p.len() - i);
            row.push(pair_kernel(spec, &p[i], &p[i])?);
            for j in i + 1..p.len() {
                let k = pair_kernel(spec, &p[i], &p[j])?;
                row.push(k);
                row.push(k);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(exact_sum(rows.into_iter().flatten()))
}

fn cross_sum(spec: &KernelSpec, p: &[Prepared], q: &[Prepared]) -> Result<f64> {
    let rows: Vec<Vec<f64>> = p
        .par_iter()
        .map(|a| q.iter().map(|b| pair_kernel(spec, a, b)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    Ok(exact_sum(rows.into_iter().flatten()))
}

pub fn mmd(xs: &[Sample], ys: &[Sample], spec: &KernelSpec) -> Result<MmdResult> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyDataset("mmd input set".into()));
    }
    let px = prepare(spec, xs)?;
    let py = prepare(spec, ys)?;
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let xx_mean = within_sum(spec, &px)? / (nx * nx);
    let yy_mean = within_sum(spec, &py)? / (ny * ny);
    let xy_mean = cross_sum(spec, &px, &py)? / (nx * ny);
    Ok(MmdResult { value: xx_mean + yy_mean - 2.0 * xy_mean, xx_mean, yy_mean, xy_mean })
}

/// Bandwidth putting the kernel exponent at 1 for the median base distance
/// over `pairs` random distinct pairs. Falls back to 1 when the median is 0.
pub fn median_bandwidth(kind: KernelKind, items: &[Sample], pairs: usize, seed: u64) -> Result<f64> {
    if items.len() < 2 {
        return Err(Error::EmptyDataset("median heuristic needs two items".into()));
    }
    let mut rng = rng_from_seed(seed);
    let dists = (0..pairs.max(1))
        .map(|_| {
            let i = rng.random_range(0..items.len());
            let mut j = rng.random_range(0..items.len() - 1);
            if j >= i {
                j += 1;
            }
            base_distance(kind, &items[i], &items[j])
        })
        .collect::<Result<Vec<f64>>>()?;
    let med = stats::median(&dists);
    if !(med > 0.0) {
        return Ok(1.0);
    }
    Ok(match kind {
        KernelKind::Naive => med,
        _ => (med / 2.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::canonicalized_clouds;

    fn pt(v: &[f64]) -> Sample {
        Sample::cloud(v.to_vec(), 3)
    }

    #[test]
    fn exact_sum_is_order_free() {
        let v = [1e16, 1.0, -1e16, 3.0, 1e-3, 0.1, 0.2];
        let mut w = v;
        w.reverse();
        assert_eq!(exact_sum(v), exact_sum(w));
        assert_eq!(exact_sum(v), 4.301);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn identical_clouds_have_unit_kernel() {
        let x = pt(&[0.1, 0.2, 0.3, 1.0, -1.0, 2.0]);
        for kind in KernelKind::ALL {
            assert_eq!(kernel(&KernelSpec::new(kind, 0.7).unwrap(), &x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_point_hand_values() {
        let x = pt(&[0.0, 0.0, 0.0]);
        let y = pt(&[1.0, 0.0, 0.0]);
        let s: f64 = 0.8;
        let expect = (-1.0 / (2.0 * s * s)).exp();
        assert!((kernel_chamfer(&x, &y, s).unwrap() - expect).abs() < 1e-15);
        assert!((kernel_hausdorff(&x, &y, s).unwrap() - expect).abs() < 1e-15);
        // naive: mean diff 1, second moment diff only in the (0,0) entry: 1
        let y2 = pt(&[2.0, 0.0, 0.0]);
        let e = (-(4.0 + 16.0) / s).exp();
        assert!((kernel_naive(&x, &y2, s).unwrap() - e).abs() < 1e-15);
    }

    #[test]
    fn wide_bandwidth_gives_one() {
        let x = pt(&[0.0, 1.0, 2.0]);
        let y = pt(&[3.0, -1.0, 0.5]);
        for kind in KernelKind::ALL {
            let k = kernel(&KernelSpec::new(kind, 1e14).unwrap(), &x, &y).unwrap();
            assert!((k - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hausdorff_outlier_dominates() {
        let x = pt(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let y = pt(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 10.0, 0.0, 0.0]);
        let s = 2.0;
        assert!((kernel_hausdorff(&x, &y, s).unwrap() - (-9.0 / 8.0f64).exp()).abs() < 1e-15);
        assert!(hausdorff_distance(&x, &y).unwrap() >= chamfer_distance(&x, &y).unwrap());
    }

    #[test]
    fn empty_masked_cloud_errors() {
        let x = pt(&[0.0, 0.0, 0.0]).with_mask(vec![false]);
        let y = pt(&[1.0, 0.0, 0.0]);
        for kind in KernelKind::ALL {
            assert!(matches!(kernel(&KernelSpec::new(kind, 1.0).unwrap(), &x, &y), Err(Error::EmptyCloud)));
        }
    }

    #[test]
    fn single_pair_mmd_formula() {
        let x = pt(&[0.0, 0.0, 0.0]);
        let y = pt(&[0.5, 0.5, 0.0]);
        let spec = KernelSpec::new(KernelKind::Chamfer, 1.0).unwrap();
        let r = mmd(&[x.clone()], &[y.clone()], &spec).unwrap();
        let k = kernel(&spec, &x, &y).unwrap();
        assert!((r.value - 2.0 * (1.0 - k)).abs() < 1e-15);
    }

    #[test]
    fn self_distance_exactly_zero() {
        let xs = canonicalized_clouds(25, 6, 4.0, 1).unwrap().items;
        for kind in KernelKind::ALL {
            let r = mmd(&xs, &xs, &KernelSpec::new(kind, 1.3).unwrap()).unwrap();
            assert_eq!(r.value, 0.0, "{kind}");
        }
    }

    #[test]
    fn iid_sets_nearly_zero() {
        let xs = canonicalized_clouds(200, 8, 1.0, 2).unwrap().items;
        let ys = canonicalized_clouds(200, 8, 1.0, 3).unwrap().items;
        let r = mmd(&xs, &ys, &KernelSpec::new(KernelKind::Chamfer, 1.0).unwrap()).unwrap();
        assert!(r.value.abs() < 0.02, "{}", r.value);
        let rn = mmd(&xs, &ys, &KernelSpec::new(KernelKind::Naive, 10.0).unwrap()).unwrap();
        assert!(rn.value >= -1e-12);
    }

    #[test]
    fn median_bandwidth_unit_exponent() {
        let xs = canonicalized_clouds(50, 5, 2.0, 4).unwrap().items;
        let s = median_bandwidth(KernelKind::Chamfer, &xs, 100, 0).unwrap();
        assert!(s > 0.0);
        let n = median_bandwidth(KernelKind::Naive, &xs, 100, 0).unwrap();
        assert!(n > 0.0);
        assert!(median_bandwidth(KernelKind::Naive, &xs[..1], 10, 0).is_err());
    }
}

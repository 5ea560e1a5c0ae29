//! Synthetic data generators and detection-dataset assembly.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{LabelSpace, LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::groups::GroupAction;
use crate::linalg;
use crate::rng::{rng_from_seed, substream};

/// Binary original-vs-transformed datasets for both splits.
#[derive(Debug, Clone)]
pub struct DetectionDataset {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub group: GroupAction,
    pub seed: u64,
}

/// Randomly halve one split: `ceil(N/2)` items get an independent Haar
/// transform and label 1, the rest are copied verbatim with label 0.
pub fn detection_split<R: Rng + ?Sized>(
    raw: &LabeledDataset,
    group: &GroupAction,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset("detection split".into()));
    }
    let n = raw.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_transformed = n.div_ceil(2);
    let mut items = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (pos, &i) in order.iter().enumerate() {
        if pos < n_transformed {
            let g = group.haar_sample(rng);
            items.push(group.apply(&g, &raw.items[i])?);
            labels.push(1.0);
        } else {
            items.push(raw.items[i].clone());
            labels.push(0.0);
        }
    }
    Ok(LabeledDataset::new(items, labels, LabelSpace::Binary))
}

pub fn build_detection_dataset(
    raw_train: &LabeledDataset,
    raw_test: &LabeledDataset,
    group: &GroupAction,
    seed: u64,
) -> Result<DetectionDataset> {
    let train = detection_split(raw_train, group, &mut substream(seed, 0))?;
    let test = detection_split(raw_test, group, &mut substream(seed, 1))?;
    Ok(DetectionDataset { train, test, group: group.clone(), seed })
}

/// Probability vector over the `r` points of one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDistribution {
    pub theta: Vec<f64>,
}

impl OrbitDistribution {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidDistribution("empty weight vector".into()));
        }
        if theta.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        let total: f64 = theta.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        Ok(OrbitDistribution { theta })
    }

    pub fn uniform(r: usize) -> Self {
        OrbitDistribution { theta: vec![1.0 / r as f64; r] }
    }

    pub fn one_hot(r: usize, at: usize) -> Self {
        let mut theta = vec![0.0; r];
        theta[at] = 1.0;
        OrbitDistribution { theta }
    }

    pub fn r(&self) -> usize {
        self.theta.len()
    }
}

/// `n` draws `g_i x0` with `g_i ~ theta` over the enumerated elements.
/// Labels hold the element index.
pub fn orbit_dataset(
    group: &GroupAction,
    x0: &Sample,
    dist: &OrbitDistribution,
    n: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let elems = group.elements()?;
    if elems.len() != dist.r() {
        return Err(Error::Config(format!(
            "orbit distribution has {} weights but the group has {} elements",
            dist.r(),
            elems.len()
        )));
    }
    let orbit: Vec<Sample> = elems.iter().map(|g| group.apply(g, x0)).collect::<Result<_>>()?;
    let pick = WeightedIndex::new(&dist.theta)
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let mut items = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = pick.sample(&mut rng);
        items.push(orbit[k].clone());
        labels.push(k as f64);
    }
    Ok(LabeledDataset::new(items, labels, LabelSpace::Classes(dist.r())))
}

/// A planar point with no nontrivial stabilizer under rotations, used as the
/// default orbit seed.
pub fn generic_planar_point() -> Sample {
    Sample::vector(vec![0.8, 0.3])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwissRollConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub base_z: f64,
    pub separated_z: f64,
    pub z_jitter: f64,
}

impl Default for SwissRollConfig {
    fn default() -> Self {
        SwissRollConfig {
            t_min: 1.5 * PI,
            t_max: 4.5 * PI,
            base_z: 0.0,
            separated_z: 1.0,
            z_jitter: 0.05,
        }
    }
}

/// Two interleaved spirals with binary labels, one 3D point per item.
/// Class 1 is the class-0 spiral rotated by a half turn; each class-1 point
/// is lifted to the separated level with probability `p`.
pub fn swiss_roll(n: usize, p: f64, seed: u64) -> Result<LabeledDataset> {
    swiss_roll_with(n, p, seed, &SwissRollConfig::default())
}

pub fn swiss_roll_with(n: usize, p: f64, seed: u64, cfg: &SwissRollConfig) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("swiss roll fraction p={p} outside [0,1]")));
    }
    if !(cfg.z_jitter >= 0.0 && cfg.t_max > cfg.t_min) {
        return Err(Error::Config("invalid swiss roll parameters".into()));
    }
    let mut rng = rng_from_seed(seed);
    let jitter = Normal::new(0.0, cfg.z_jitter).map_err(|e| Error::Config(e.to_string()))?;
    let n1 = n / 2;
    let mut labels: Vec<f64> = (0..n).map(|i| if i < n - n1 { 0.0 } else { 1.0 }).collect();
    labels.shuffle(&mut rng);
    let mut items = Vec::with_capacity(n);
    for &label in &labels {
        let t = rng.random_range(cfg.t_min..cfg.t_max);
        let (s, c) = t.sin_cos();
        let (mut x, mut y) = (t * c, t * s);
        let mut z = cfg.base_z;
        if label == 1.0 {
            x = -x;
            y = -y;
            if rng.random_bool(p) {
                z = cfg.separated_z;
            }
        }
        z += jitter.sample(&mut rng);
        items.push(Sample::cloud(vec![x, y, z], 3));
    }
    Ok(LabeledDataset::new(items, labels, LabelSpace::Binary))
}

/// Clouds of `m_points` i.i.d. points from `N(0, diag(anisotropy, 1, 1))`.
pub fn canonicalized_clouds(
    n_clouds: usize,
    m_points: usize,
    anisotropy: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(anisotropy >= 1.0 && anisotropy.is_finite()) {
        return Err(Error::Config(format!("anisotropy must be >= 1, got {anisotropy}")));
    }
    if m_points == 0 {
        return Err(Error::Config("clouds need at least one point".into()));
    }
    let mut rng = rng_from_seed(seed);
    let scale = [anisotropy.sqrt(), 1.0, 1.0];
    let items = (0..n_clouds)
        .map(|_| {
            let coords = (0..m_points * 3)
                .map(|k| scale[k % 3] * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Sample::cloud(coords, 3)
        })
        .collect();
    Ok(LabeledDataset::unlabeled(items))
}

/// Covariance with `d_c` coupling modes plus the bases it was built from.
#[derive(Debug, Clone)]
pub struct MinimalModel {
    pub sigma: DMatrix<f64>,
    /// Coupling modes `u_k` as columns.
    pub coupling: DMatrix<f64>,
    pub v0: DMatrix<f64>,
    pub vperp: DMatrix<f64>,
    pub p0: DMatrix<f64>,
    pub sigma_c: f64,
    pub sigma_w: f64,
}

pub fn minimal_model_covariance(
    d: usize,
    d0: usize,
    d_c: usize,
    sigma_c: f64,
    sigma_w: f64,
    group: &GroupAction,
) -> Result<MinimalModel> {
    if group.dim() != d {
        return Err(Error::Config(format!("group acts on dimension {}, expected {d}", group.dim())));
    }
    if d0 > d || d_c >= d0.min(d - d0) {
        return Err(Error::Config(format!(
            "need d_c < min(d0, d - d0); got d={d}, d0={d0}, d_c={d_c}"
        )));
    }
    if !(sigma_c >= sigma_w && sigma_w >= 0.0) {
        return Err(Error::Config(format!(
            "need sigma_c >= sigma_w >= 0; got {sigma_c}, {sigma_w}"
        )));
    }
    let (v0, vperp) = group.invariant_basis()?;
    if v0.ncols() != d0 {
        return Err(Error::Config(format!("group has invariant dimension {}, expected {d0}", v0.ncols())));
    }
    let mut coupling = DMatrix::zeros(d, d_c);
    for k in 0..d_c {
        let u = (v0.column(k) + vperp.column(k)) / 2f64.sqrt();
        coupling.set_column(k, &u);
    }
    let mut sigma = DMatrix::identity(d, d) * sigma_w;
    sigma += &coupling * coupling.transpose() * (sigma_c - sigma_w);
    let p0 = &v0 * v0.transpose();
    Ok(MinimalModel { sigma, coupling, v0, vperp, p0, sigma_c, sigma_w })
}

/// Rows of `x` i.i.d. `N(0, sigma)`; `y = x beta + eps`, `eps ~ N(0, noise^2)`.
pub fn gaussian_regression_sample(
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    noise: f64,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let l = linalg::psd_factor(sigma)?;
    gaussian_regression_sample_factored(&l, beta, noise, n, seed)
}

/// Same as [`gaussian_regression_sample`] with a precomputed factor `l l^T = sigma`.
pub fn gaussian_regression_sample_factored(
    l: &DMatrix<f64>,
    beta: &DVector<f64>,
    noise: f64,
    n: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let d = l.nrows();
    if beta.len() != d {
        return Err(Error::Dimension { expected: d, got: beta.len() });
    }
    let mut rng = rng_from_seed(seed);
    let z = DMatrix::<f64>::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let x = z * l.transpose();
    let mut y = &x * beta;
    if noise != 0.0 {
        for v in y.iter_mut() {
            *v += noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok((x, y))
}

/// Random unit direction in the invariant subspace, scaled to `norm`.
pub fn invariant_beta(group: &GroupAction, d: usize, norm: f64, seed: u64) -> Result<DVector<f64>> {
    let p0 = group.invariant_projection_for(d)?;
    if p0.trace() < 0.5 {
        return Err(Error::NoInvariantDirection);
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let z = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let b = &p0 * z;
        let len = b.norm();
        if len > 1e-8 {
            return Ok(b * (norm / len));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors(n: usize) -> LabeledDataset {
        LabeledDataset::unlabeled((0..n).map(|i| Sample::vector(vec![i as f64, 1.0])).collect())
    }

    #[test]
    fn detection_halves_and_determinism() {
        let g = GroupAction::cyclic(4);
        let a = build_detection_dataset(&vectors(100), &vectors(41), &g, 7).unwrap();
        let ones = a.train.labels.iter().filter(|&&l| l == 1.0).count();
        assert_eq!(ones, 50);
        assert_eq!(a.test.labels.iter().filter(|&&l| l == 1.0).count(), 21);
        let b = build_detection_dataset(&vectors(100), &vectors(41), &g, 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let raw = vectors(100);
        for (x, &l) in a.train.items.iter().zip(&a.train.labels) {
            if l == 0.0 {
                assert!(raw.items.contains(x));
            }
        }
    }

    #[test]
    fn trivial_group_transforms_nothing() {
        let raw = vectors(20);
        let det = build_detection_dataset(&raw, &raw, &GroupAction::Trivial { dim: 0 }, 1).unwrap();
        let mut got = det.train.items.clone();
        got.sort_by(|a, b| a.coords[0].total_cmp(&b.coords[0]));
        assert_eq!(got, raw.items);
    }

    #[test]
    fn empty_input_rejected() {
        let g = GroupAction::cyclic(4);
        let e = LabeledDataset::unlabeled(vec![]);
        assert!(matches!(build_detection_dataset(&e, &vectors(3), &g, 0), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn orbit_weights() {
        let g = GroupAction::cyclic(4);
        let x0 = generic_planar_point();
        let one = orbit_dataset(&g, &x0, &OrbitDistribution::one_hot(4, 2), 50, 1).unwrap();
        assert!(one.items.iter().all(|x| *x == one.items[0]));
        let half = OrbitDistribution::new(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let two = orbit_dataset(&g, &x0, &half, 200, 2).unwrap();
        let mut distinct: Vec<Sample> = Vec::new();
        for x in two.items {
            if !distinct.contains(&x) {
                distinct.push(x);
            }
        }
        assert_eq!(distinct.len(), 2);
        assert!(orbit_dataset(&g, &x0, &OrbitDistribution::uniform(3), 5, 0).is_err());
        assert!(OrbitDistribution::new(vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn uniform_orbit_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let g = GroupAction::cyclic(4);
        let ds = orbit_dataset(&g, &generic_planar_point(), &OrbitDistribution::uniform(4), 10000, 5).unwrap();
        let mut counts = [0f64; 4];
        for &l in &ds.labels {
            counts[l as usize] += 1.0;
        }
        let stat: f64 = counts.iter().map(|c| (c - 2500.0).powi(2) / 2500.0).sum();
        let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(stat);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn swiss_roll_properties() {
        let ds = swiss_roll(1000, 1.0, 3).unwrap();
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1.0).count(), 500);
        for (x, &l) in ds.items.iter().zip(&ds.labels) {
            assert_eq!(x.coords[2] > 0.5, l == 1.0);
        }
        let ds = swiss_roll(1000, 0.0, 3).unwrap();
        assert!(ds.items.iter().all(|x| x.coords[2] < 0.5));
        assert!(swiss_roll(10, 1.5, 0).is_err());
    }

    #[test]
    fn swiss_roll_separated_fraction_is_binomial() {
        let ds = swiss_roll(4000, 0.3, 9).unwrap();
        let lifted = ds
            .items
            .iter()
            .zip(&ds.labels)
            .filter(|(x, &l)| l == 1.0 && x.coords[2] > 0.5)
            .count() as f64;
        let (n, p) = (2000.0, 0.3);
        let z = (lifted - n * p) / (n * p * (1.0 - p)).sqrt();
        assert!(z.abs() < 3.5, "z = {z}");
    }

    #[test]
    fn clouds_shape_and_variance() {
        let ds = canonicalized_clouds(200, 10, 16.0, 4).unwrap();
        assert_eq!(ds.len(), 200);
        assert_eq!(ds.items[0].n_points(), 10);
        let mut vx = 0.0;
        let mut vy = 0.0;
        for x in &ds.items {
            for p in x.valid_points() {
                vx += p[0] * p[0];
                vy += p[1] * p[1];
            }
        }
        assert!((vx / 2000.0 - 16.0).abs() < 1.5);
        assert!((vy / 2000.0 - 1.0).abs() < 0.15);
        assert!(canonicalized_clouds(3, 3, 0.5, 0).is_err());
    }

    #[test]
    fn minimal_model_spectrum() {
        let g = GroupAction::permute_first(6, 10).unwrap();
        let mm = minimal_model_covariance(10, 5, 2, 3.0, 0.5, &g).unwrap();
        let (vals, _) = linalg::sorted_eigen(&mm.sigma);
        let expect = [3.0, 3.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        for (a, b) in vals.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        for k in 0..2 {
            let u = mm.coupling.column(k).into_owned();
            assert!(((&mm.p0 * &u).norm_squared() - 0.5).abs() < 1e-12);
        }
        let iso = minimal_model_covariance(10, 5, 2, 0.7, 0.7, &g).unwrap();
        assert!(linalg::frobenius(&(iso.sigma - DMatrix::identity(10, 10) * 0.7)) < 1e-14);
        assert!(minimal_model_covariance(10, 5, 5, 1.0, 0.1, &g).is_err());
        assert!(minimal_model_covariance(10, 5, 2, 0.1, 1.0, &g).is_err());
    }

    #[test]
    fn regression_sample_edge_cases() {
        let sigma = DMatrix::identity(4, 4);
        let (_, y) = gaussian_regression_sample(&sigma, &DVector::zeros(4), 0.0, 20, 1).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        let (x, _) = gaussian_regression_sample(&DMatrix::zeros(4, 4), &DVector::zeros(4), 1.0, 20, 1).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            gaussian_regression_sample(&bad, &DVector::zeros(2), 0.0, 5, 0),
            Err(Error::Matrix(_))
        ));
    }

    #[test]
    fn regression_sample_covariance() {
        let a = DMatrix::from_fn(5, 5, |i, j| ((i + 2 * j) as f64 * 0.9).cos());
        let sigma = &a * a.transpose() + DMatrix::identity(5, 5) * 0.5;
        let (x, _) = gaussian_regression_sample(&sigma, &DVector::zeros(5), 0.0, 100_000, 11).unwrap();
        let emp = x.transpose() * &x / 100_000.0;
        let rel = linalg::operator_norm(&(emp - &sigma)) / linalg::operator_norm(&sigma);
        assert!(rel < 0.02, "relative error {rel}");
    }

    #[test]
    fn invariant_beta_is_fixed() {
        let g = GroupAction::parse("sym:n=3", None).unwrap();
        let b = invariant_beta(&g, 3, 2.0, 5).unwrap();
        assert!((b.norm() - 2.0).abs() < 1e-12);
        assert!((b[0] - b[1]).abs() < 1e-12 && (b[1] - b[2]).abs() < 1e-12);
        for e in g.elements().unwrap() {
            let m = g.matrix(&e).unwrap().unwrap();
            assert!((&m * &b - &b).amax() < 1e-10);
        }
        let t = invariant_beta(&GroupAction::Trivial { dim: 0 }, 7, 1.5, 1).unwrap();
        assert!((t.norm() - 1.5).abs() < 1e-12);
        let p = GroupAction::permute_first(4, 4).unwrap();
        let b = invariant_beta(&p, 4, 1.0, 2).unwrap();
        assert!((b[0] - b[3]).abs() < 1e-12);
    }
}

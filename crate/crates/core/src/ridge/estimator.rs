use nalgebra::{DMatrix, DVector};

use super::EstimatorMode;
use crate::error::{Error, Result};
use crate::groups::GroupAction;
use crate::linalg;

/// `(X^T X + n lambda I)^{-1} X^T`, using the dual form when `d > n`.
fn ridge_map(x: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    if lambda == 0.0 {
        return Ok(linalg::pinv(x));
    }
    let shift = n as f64 * lambda;
    if d > n {
        let mut gram = x * x.transpose();
        for i in 0..n {
            gram[(i, i)] += shift;
        }
        let inv = linalg::solve_spd(&gram, &DMatrix::identity(n, n))?;
        Ok(x.transpose() * inv)
    } else {
        let mut gram = x.transpose() * x;
        for i in 0..d {
            gram[(i, i)] += shift;
        }
        linalg::solve_spd(&gram, &x.transpose())
    }
}

fn check_shapes(x: &DMatrix<f64>, p0: &DMatrix<f64>, lambda: f64) -> Result<()> {
    let d = x.ncols();
    if p0.shape() != (d, d) {
        return Err(Error::Dimension { expected: d, got: p0.nrows() });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset("regression design".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("ridge parameter must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// The `d x n` matrix `M` with `beta_hat = M y` for the given mode.
pub fn estimator_map(
    x: &DMatrix<f64>,
    lambda: f64,
    mode: EstimatorMode,
    p0: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_shapes(x, p0, lambda)?;
    match mode {
        EstimatorMode::Vanilla => ridge_map(x, lambda),
        EstimatorMode::TestSymmetrized => Ok(p0 * ridge_map(x, lambda)?),
        // Ridge on projected features: (P0 S P0 + lambda)^{-1} P0 S_yx.
        EstimatorMode::AugmentedInvariant => ridge_map(&(x * p0), lambda),
    }
}

pub fn fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    mode: EstimatorMode,
    p0: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension { expected: x.nrows(), got: y.len() });
    }
    Ok(estimator_map(x, lambda, mode, p0)? * y)
}

/// Max-abs deviation between the explicitly group-averaged estimator
/// `(E_g[g S g^T] + lambda I)^{-1} P0 S_yx` and the invariant-feature fit.
pub fn augmentation_equivalence_check(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    group: &GroupAction,
) -> Result<f64> {
    let (n, d) = x.shape();
    let p0 = group.invariant_projection_for(d)?;
    let s = x.transpose() * x / n as f64;
    let s_yx = x.transpose() * y / n as f64;
    let s_aug = group.symmetrize_covariance(&s)?;
    let rhs = &p0 * s_yx;
    let beta_aug = if lambda == 0.0 {
        linalg::pinv_sym(&s_aug).0 * rhs
    } else {
        linalg::solve_spd_vec(&(s_aug + DMatrix::identity(d, d) * lambda), &rhs)?
    };
    let beta_inv = fit(x, y, lambda, EstimatorMode::AugmentedInvariant, &p0)?;
    Ok((beta_aug - beta_inv).amax())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rng_from_seed(seed);
        DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn noiseless_interpolation_recovers_beta() {
        let x = random_matrix(30, 6, 1);
        let beta = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.5]);
        let y = &x * &beta;
        let eye = DMatrix::identity(6, 6);
        let b = fit(&x, &y, 0.0, EstimatorMode::Vanilla, &eye).unwrap();
        assert!((b - &beta).amax() < 1e-8);
        let b = fit(&x, &y, 1e-12, EstimatorMode::Vanilla, &eye).unwrap();
        assert!((b - beta).amax() < 1e-8);
    }

    #[test]
    fn zero_response_gives_zero() {
        let x = random_matrix(10, 20, 2);
        let p0 = GroupAction::permute_first(5, 20).unwrap().invariant_projection().unwrap();
        for mode in EstimatorMode::ALL {
            for lambda in [0.0, 0.3] {
                let b = fit(&x, &DVector::zeros(10), lambda, mode, &p0).unwrap();
                assert!(b.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn augmented_estimate_lies_in_invariant_space() {
        let x = random_matrix(15, 9, 3);
        let y = DVector::from_fn(15, |i, _| (i as f64).sin());
        let p0 = GroupAction::permute_first(4, 9).unwrap().invariant_projection().unwrap();
        for lambda in [0.0, 0.1, 5.0] {
            let b = fit(&x, &y, lambda, EstimatorMode::AugmentedInvariant, &p0).unwrap();
            assert!((&b - &p0 * &b).norm() < 1e-10);
        }
    }

    #[test]
    fn primal_and_dual_agree() {
        let x = random_matrix(8, 12, 4);
        let y = DVector::from_fn(8, |i, _| i as f64 - 3.0);
        let lambda = 0.2;
        let dual = ridge_map(&x, lambda).unwrap() * &y;
        let s = x.transpose() * &x / 8.0 + DMatrix::identity(12, 12) * lambda;
        let primal = s.lu().solve(&(x.transpose() * &y / 8.0)).unwrap();
        assert!((dual - primal).amax() < 1e-10);
    }

    #[test]
    fn equivalence_on_s3() {
        let g = GroupAction::parse("sym:n=3", None).unwrap();
        let x = random_matrix(20, 3, 5);
        let y = DVector::from_fn(20, |i, _| (i as f64 * 0.3).cos());
        assert!(augmentation_equivalence_check(&x, &y, 0.1, &g).unwrap() < 1e-8);
        assert!(augmentation_equivalence_check(&x, &y, 0.0, &g).unwrap() < 1e-8);
        assert!(augmentation_equivalence_check(&x, &y, 1e6, &g).unwrap() < 1e-12);
    }

    #[test]
    fn equivalence_trivial_group_matches_vanilla() {
        let x = random_matrix(12, 4, 6);
        let y = DVector::from_fn(12, |i, _| i as f64);
        let dev = augmentation_equivalence_check(&x, &y, 0.5, &GroupAction::Trivial { dim: 0 }).unwrap();
        assert!(dev < 1e-12);
        let eye = DMatrix::identity(4, 4);
        let a = fit(&x, &y, 0.5, EstimatorMode::Vanilla, &eye).unwrap();
        let b = fit(&x, &y, 0.5, EstimatorMode::AugmentedInvariant, &eye).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let x = random_matrix(5, 3, 7);
        let eye = DMatrix::identity(3, 3);
        assert!(fit(&x, &DVector::zeros(4), 0.1, EstimatorMode::Vanilla, &eye).is_err());
        assert!(fit(&x, &DVector::zeros(5), 0.1, EstimatorMode::Vanilla, &DMatrix::identity(2, 2)).is_err());
    }
}

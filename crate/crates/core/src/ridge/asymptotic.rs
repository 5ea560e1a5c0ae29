use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{EstimatorMode, RidgeProblem};
use crate::error::{Error, Result};

/// Root of `kappa = lambda / (1 - T(kappa))`, `T(k) = Tr((S + k)^{-1} S) / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaFixedPoint {
    pub kappa: f64,
    pub t: f64,
    /// `kappa (1 - T(kappa)) - lambda` at the returned root.
    pub residual: f64,
}

fn clamp_spectrum(eigs: &[f64]) -> Vec<f64> {
    let max = eigs.iter().cloned().fold(0.0f64, f64::max);
    eigs.iter().map(|&s| if s > 1e-12 * max { s } else { 0.0 }).collect()
}

fn t_of(eigs: &[f64], n: f64, kappa: f64) -> f64 {
    eigs.iter().filter(|&&s| s > 0.0).map(|&s| s / (s + kappa)).sum::<f64>() / n
}

fn g_of(eigs: &[f64], n: f64, lambda: f64, kappa: f64) -> f64 {
    kappa - eigs.iter().map(|&s| kappa * s / (s + kappa)).sum::<f64>() / n - lambda
}

pub fn kappa_fixed_point(sigma_mu: &DMatrix<f64>, n: usize, lambda: f64) -> Result<KappaFixedPoint> {
    let eigs: Vec<f64> = crate::linalg::symmetrize(sigma_mu).symmetric_eigenvalues().iter().cloned().collect();
    kappa_from_spectrum(&eigs, n, lambda)
}

/// Bisection on `g(k) = k (1 - T(k)) - lambda`, which is convex with
/// `g(0) = -lambda`, so the positive root is unique. The bracket starts at
/// `(max(lambda, tiny), lambda + tr(S)/n]` and is halved to machine precision.
pub fn kappa_from_spectrum(eigs: &[f64], n: usize, lambda: f64) -> Result<KappaFixedPoint> {
    if n == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("ridge parameter must be >= 0, got {lambda}")));
    }
    let eigs = clamp_spectrum(eigs);
    let nf = n as f64;
    let rank = eigs.iter().filter(|&&s| s > 0.0).count();
    let trace: f64 = eigs.iter().sum();
    if lambda == 0.0 && rank <= n {
        return Err(Error::Regime(format!(
            "ridgeless fixed point needs rank/n > 1; got rank={rank}, n={n}"
        )));
    }
    if trace == 0.0 {
        return Ok(KappaFixedPoint { kappa: lambda, t: 0.0, residual: 0.0 });
    }
    let g = |k: f64| g_of(&eigs, nf, lambda, k);
    let mut hi = lambda + trace / nf;
    let mut lo = if lambda > 0.0 { lambda } else { 1e-12 * trace / nf };
    while g(lo) >= 0.0 {
        // Ridgeless root below the initial lower end.
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::Matrix("fixed point bracket collapsed".into()));
        }
    }
    if g(hi) < 0.0 {
        return Err(Error::Matrix("fixed point bracket does not contain a root".into()));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo), g(hi));
    let kappa = if glo.abs() < ghi.abs() { lo } else { hi };
    Ok(KappaFixedPoint { kappa, t: t_of(&eigs, nf, kappa), residual: g(kappa) })
}

/// Deterministic-equivalent bias and variance for one estimator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicRisk {
    pub kappa: f64,
    /// `T(kappa)`, i.e. first-order degrees of freedom over `n`.
    pub t: f64,
    pub alpha_mumu: f64,
    pub alpha_munu: f64,
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
    /// Set at or past the interpolation threshold (`alpha_mumu >= 1`).
    pub diverged: bool,
}

/// Evaluate the deterministic equivalents with `mu` the training covariance
/// (population `Sigma`, or `P0 Sigma P0` for the augmented estimator) and
/// `nu` the covariance the error is measured in (`P0 Sigma P0` for the
/// test-symmetrized estimator, `Sigma` otherwise).
///
/// For `lambda = 0` below the threshold (`rank(Sigma_mu) < n`) the effective
/// ridge is 0 and the formulas reduce to their least-squares limits.
pub fn deterministic_risk(problem: &RidgeProblem, mode: EstimatorMode) -> Result<DeterministicRisk> {
    let sigma_inv = problem.sigma_inv();
    let (mu, nu) = match mode {
        EstimatorMode::Vanilla => (&problem.sigma, &problem.sigma),
        EstimatorMode::TestSymmetrized => (&problem.sigma, &sigma_inv),
        EstimatorMode::AugmentedInvariant => (&sigma_inv, &problem.sigma),
    };
    let eig = crate::linalg::symmetrize(mu).symmetric_eigen();
    let s = clamp_spectrum(eig.eigenvalues.as_slice());
    let q = &eig.eigenvectors;
    let n = problem.n as f64;
    let rank = s.iter().filter(|&&v| v > 0.0).count();

    let lambda = problem.lambda;
    let kappa = if lambda == 0.0 && rank <= problem.n {
        0.0
    } else {
        kappa_from_spectrum(&s, problem.n, lambda)?.kappa
    };
    let nu_rot = q.transpose() * nu * q;
    let b = q.transpose() * &problem.beta;
    let w: Vec<f64> = s.iter().map(|&v| if v > 0.0 { v / (v + kappa).powi(2) } else { 0.0 }).collect();
    let alpha_mumu = s.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>() / n;
    let alpha_munu = w.iter().enumerate().map(|(i, wi)| wi * nu_rot[(i, i)]).sum::<f64>() / n;
    let t = if kappa > 0.0 { t_of(&s, n, kappa) } else { rank as f64 / n };
    let term1: f64 = b.iter().zip(&w).map(|(bi, wi)| bi * bi * wi).sum();
    // kappa (S + kappa)^{-1} beta, taking the kappa -> 0 limit on null directions.
    let c = nalgebra::DVector::from_iterator(
        s.len(),
        s.iter().zip(b.iter()).map(|(&v, &bi)| if v > 0.0 { kappa / (v + kappa) * bi } else { bi }),
    );
    let term2 = c.dot(&(&nu_rot * &c));

    let s2 = problem.noise * problem.noise;
    if alpha_mumu >= 1.0 - 1e-12 {
        return Ok(DeterministicRisk {
            kappa,
            t,
            alpha_mumu,
            alpha_munu,
            bias: f64::INFINITY,
            variance: f64::INFINITY,
            risk: f64::INFINITY,
            diverged: true,
        });
    }
    let amp = alpha_munu / (1.0 - alpha_mumu);
    let bias = kappa * kappa * amp * term1 + term2;
    let variance = s2 * amp;
    Ok(DeterministicRisk { kappa, t, alpha_mumu, alpha_munu, bias, variance, risk: bias + variance, diverged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupAction;
    use nalgebra::DVector;

    #[test]
    fn isotropic_ridgeless_kappa() {
        for (d, n) in [(200usize, 100usize), (300, 100), (150, 100), (1000, 100)] {
            let k = kappa_from_spectrum(&vec![1.0; d], n, 0.0).unwrap();
            let gamma = d as f64 / n as f64;
            assert!((k.kappa - (gamma - 1.0)).abs() < 1e-12, "{d} {n}: {}", k.kappa);
            assert!(k.residual.abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_ridge_matches_quadratic() {
        // kappa^2 + kappa (1 - gamma - lambda) - lambda = 0
        for (gamma, lambda) in [(0.5, 0.1), (2.0, 0.3), (4.0, 1e-3), (1.0, 2.0)] {
            let n = 50usize;
            let d = (gamma * n as f64) as usize;
            let k = kappa_from_spectrum(&vec![1.0; d], n, lambda).unwrap();
            let b = 1.0 - gamma - lambda;
            let exact = (-b + (b * b + 4.0 * lambda).sqrt()) / 2.0;
            assert!((k.kappa - exact).abs() < 1e-12, "{gamma} {lambda}");
            assert!(k.residual.abs() < 1e-12);
            assert!(k.t < 1.0);
        }
    }

    #[test]
    fn large_lambda_kappa_approaches_lambda() {
        let k = kappa_from_spectrum(&[1.0, 2.0, 0.5], 10, 1e8).unwrap();
        assert!((k.kappa / 1e8 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn underparameterized_ridgeless_is_regime_error() {
        assert!(matches!(kappa_from_spectrum(&[1.0; 5], 10, 0.0), Err(Error::Regime(_))));
        assert!(matches!(kappa_from_spectrum(&[1.0; 10], 10, 0.0), Err(Error::Regime(_))));
    }

    #[test]
    fn isotropic_augmented_total() {
        // n = 100, d0 = 200: kappa = 1, alpha = 1/2, B = 1/2, V = 1.
        let g = GroupAction::permute_first(101, 300).unwrap();
        let beta = crate::synthdata::invariant_beta(&g, 300, 1.0, 1).unwrap();
        let p = RidgeProblem::new(DMatrix::identity(300, 300), beta, 1.0, 100, 0.0, &g).unwrap();
        let r = deterministic_risk(&p, EstimatorMode::AugmentedInvariant).unwrap();
        assert!((r.kappa - 1.0).abs() < 1e-12);
        assert!((r.alpha_mumu - 0.5).abs() < 1e-12);
        assert!((r.bias - 0.5).abs() < 1e-12);
        assert!((r.variance - 1.0).abs() < 1e-12);
        assert!((r.risk - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_zero_noise() {
        let g = GroupAction::permute_first(3, 6).unwrap();
        let p = RidgeProblem::new(DMatrix::identity(6, 6), DVector::zeros(6), 0.0, 4, 0.1, &g).unwrap();
        for mode in EstimatorMode::ALL {
            let r = deterministic_risk(&p, mode).unwrap();
            assert_eq!((r.bias, r.variance), (0.0, 0.0));
        }
    }

    #[test]
    fn least_squares_limit_below_threshold() {
        // d/n = 0.2, ridgeless: V -> sigma^2 gamma / (1 - gamma)
        let g = GroupAction::Trivial { dim: 0 };
        let p = RidgeProblem::new(DMatrix::identity(20, 20), DVector::from_element(20, 0.2), 1.0, 100, 0.0, &g).unwrap();
        let r = deterministic_risk(&p, EstimatorMode::Vanilla).unwrap();
        assert!((r.variance - 0.25).abs() < 1e-12);
        assert!(r.bias.abs() < 1e-15);
    }

    #[test]
    fn threshold_flags_divergence() {
        let g = GroupAction::Trivial { dim: 0 };
        let p = RidgeProblem::new(DMatrix::identity(10, 10), DVector::zeros(10), 1.0, 10, 0.0, &g).unwrap();
        assert!(deterministic_risk(&p, EstimatorMode::Vanilla).unwrap().diverged);
    }
}

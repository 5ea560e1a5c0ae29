use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimator_map, EstimatorMode, RidgeProblem};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats;
use crate::synthdata::gaussian_regression_sample_factored;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mode: EstimatorMode,
    pub mean: f64,
    pub std: f64,
    pub std_err: f64,
    /// Per-trial excess risks in trial order.
    pub risks: Vec<f64>,
}

impl MonteCarloSummary {
    fn from_risks(mode: EstimatorMode, risks: Vec<f64>) -> Self {
        let mean = stats::mean(&risks);
        let std = stats::std_dev(&risks);
        let std_err = std / (risks.len() as f64).sqrt();
        MonteCarloSummary { mode, mean, std, std_err, risks }
    }
}

/// Risk of every mode on shared draws: trial `t` samples `(X, y)` from
/// `derive_seed(seed, t)`, so modes are compared on identical data.
/// Trials run on the current rayon pool; results do not depend on its size.
pub fn monte_carlo_risks(
    problem: &RidgeProblem,
    modes: &[EstimatorMode],
    trials: usize,
    seed: u64,
) -> Result<Vec<MonteCarloSummary>> {
    if trials == 0 {
        return Err(Error::Config("need at least one Monte Carlo trial".into()));
    }
    let l = linalg::psd_factor(&problem.sigma)?;
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (x, y) = gaussian_regression_sample_factored(
                &l,
                &problem.beta,
                problem.noise,
                problem.n,
                derive_seed(seed, t as u64),
            )?;
            modes
                .iter()
                .map(|&mode| {
                    let m = estimator_map(&x, problem.lambda, mode, &problem.p0)?;
                    Ok(problem.excess_risk(&(m * &y)))
                })
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Round { kind: "monte_carlo", round: t, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    Ok(modes
        .iter()
        .enumerate()
        .map(|(k, &mode)| MonteCarloSummary::from_risks(mode, per_trial.iter().map(|r| r[k]).collect()))
        .collect())
}

pub fn monte_carlo_risk(
    problem: &RidgeProblem,
    mode: EstimatorMode,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    Ok(monte_carlo_risks(problem, &[mode], trials, seed)?.remove(0))
}

/// Mean excess risk over `draws` fresh noise vectors with the design `x` held
/// fixed. Each draw refits through the linear map `beta_hat = M y`.
pub fn noise_only_risk(
    x: &DMatrix<f64>,
    problem: &RidgeProblem,
    mode: EstimatorMode,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::Config("need at least one noise draw".into()));
    }
    let n = x.nrows();
    let m = estimator_map(x, problem.lambda, mode, &problem.p0)?;
    let l = linalg::psd_factor(&problem.sigma)?;
    // risk = |L^T (beta - M X beta - M eps)|^2
    let r0 = l.transpose() * (&problem.beta - &m * (x * &problem.beta));
    let k = l.transpose() * &m;
    let mut rng = rng_from_seed(seed);
    let mut eps = DVector::<f64>::zeros(n);
    let mut total = 0.0;
    for _ in 0..draws {
        for v in eps.iter_mut() {
            *v = problem.noise * rng.sample::<f64, _>(StandardNormal);
        }
        total += (&r0 - &k * &eps).norm_squared();
    }
    Ok(total / draws as f64)
}

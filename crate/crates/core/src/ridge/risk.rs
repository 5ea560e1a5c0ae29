use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EstimatorMode, RidgeProblem};
use crate::error::{Error, Result};
use crate::groups::GroupAction;
use crate::linalg;

/// Conditional (on the design) bias and variance of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
    pub risk: f64,
    /// Rank of the null-space projector in the ridgeless case.
    pub null_rank: Option<usize>,
}

fn quad(v: &DVector<f64>, m: &DMatrix<f64>) -> f64 {
    v.dot(&(m * v))
}

fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // Tr(A B) without forming the product.
    a.component_mul(&b.transpose()).sum()
}

/// Exact bias/variance closed forms for the six (mode, ridge or ridgeless)
/// cases. Modes other than vanilla require an invariant `beta`.
pub fn bias_variance_conditional(
    x: &DMatrix<f64>,
    problem: &RidgeProblem,
    mode: EstimatorMode,
) -> Result<BiasVariance> {
    let (n, d) = x.shape();
    if d != problem.dim() {
        return Err(Error::Dimension { expected: problem.dim(), got: d });
    }
    if n == 0 {
        return Err(Error::EmptyDataset("regression design".into()));
    }
    if mode != EstimatorMode::Vanilla && !problem.beta_is_invariant() {
        return Err(Error::Config(format!("{mode} closed forms require an invariant beta")));
    }
    let beta = &problem.beta;
    let sigma = &problem.sigma;
    let p0 = &problem.p0;
    let lambda = problem.lambda;
    let s2n = problem.noise * problem.noise / n as f64;
    let s_hat = x.transpose() * x / n as f64;
    let sigma_inv = problem.sigma_inv();
    let eye = DMatrix::<f64>::identity(d, d);

    let (bias, variance, null_rank) = if lambda > 0.0 {
        let (s_mu, sigma_nu_b, sigma_nu_v) = match mode {
            EstimatorMode::Vanilla => (s_hat, sigma, sigma),
            EstimatorMode::TestSymmetrized => (s_hat, &sigma_inv, &sigma_inv),
            EstimatorMode::AugmentedInvariant => (p0 * &s_hat * p0, sigma, sigma),
        };
        let a = linalg::solve_spd(&(&s_mu + &eye * lambda), &eye)?;
        let a_beta = &a * beta;
        let bias = lambda * lambda * quad(&a_beta, sigma_nu_b);
        let variance = s2n * trace_prod(&(&s_mu * &a * &a), sigma_nu_v);
        (bias, variance, None)
    } else {
        match mode {
            EstimatorMode::Vanilla | EstimatorMode::TestSymmetrized => {
                let (pinv, rank) = linalg::pinv_sym(&s_hat);
                let pi = &eye - &pinv * &s_hat;
                let target = if mode == EstimatorMode::Vanilla { sigma } else { &sigma_inv };
                let pb = &pi * beta;
                (quad(&pb, target), s2n * trace_prod(&pinv, target), Some(d - rank))
            }
            EstimatorMode::AugmentedInvariant => {
                let s_inv_hat = p0 * &s_hat * p0;
                let (pinv, rank) = linalg::pinv_sym(&s_inv_hat);
                let pi_inv = p0 - &pinv * &s_inv_hat;
                let pb = &pi_inv * beta;
                let d0 = problem.invariant_dim();
                (quad(&pb, sigma), s2n * trace_prod(&pinv, sigma), Some(d0.saturating_sub(rank)))
            }
        }
    };
    Ok(BiasVariance { bias, variance, risk: bias + variance, null_rank })
}

/// Expected ridgeless risk in the under-parameterized regime `d < n - 1`.
pub fn expected_risk_underparam(problem: &RidgeProblem, mode: EstimatorMode) -> Result<f64> {
    let (n, d) = (problem.n as f64, problem.dim() as f64);
    if problem.dim() + 1 >= problem.n {
        return Err(Error::Regime(format!("need d < n - 1; got d={d}, n={n}")));
    }
    let s2 = problem.noise * problem.noise;
    match mode {
        EstimatorMode::Vanilla => Ok(s2 * d / (n - d - 1.0)),
        EstimatorMode::AugmentedInvariant => {
            let d0 = problem.invariant_dim() as f64;
            Ok(s2 * d0 / (n - d0 - 1.0))
        }
        EstimatorMode::TestSymmetrized => {
            let inv = problem
                .sigma
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Matrix("population covariance is not full rank".into()))?
                .inverse();
            Ok(s2 * trace_prod(&inv, &problem.sigma_inv()) / (n - d - 1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermTrace {
    pub closed_form: f64,
    pub numeric: f64,
}

/// `Tr(Sigma^{-1} Sigma_inv)` for the three-coordinate permutation example,
/// where `Sigma` has the block form `[[s, r, r], [r, 1, t], [r, t, 1]]` in
/// the (invariant, non-invariant) basis. Returns the closed form and the
/// value computed from the assembled matrix; errors if they disagree beyond
/// `1e-10 * max(1, |value|)`.
pub fn perm_example_trace(sigma_inv2: f64, rho: f64, tau: f64) -> Result<PermTrace> {
    if !(sigma_inv2 > 0.0 && tau.abs() < 1.0 && sigma_inv2 * (1.0 + tau) > 2.0 * rho * rho) {
        return Err(Error::Domain(format!(
            "covariance not positive definite: sigma_inv^2={sigma_inv2}, rho={rho}, tau={tau}"
        )));
    }
    let closed_form = 1.0 / (1.0 - 2.0 * rho * rho / (sigma_inv2 * (1.0 + tau)));

    let group = GroupAction::parse("sym:n=3", None)?;
    let (v0, vp) = group.invariant_basis()?;
    let mut basis = DMatrix::zeros(3, 3);
    basis.set_column(0, &v0.column(0));
    basis.set_column(1, &vp.column(0));
    basis.set_column(2, &vp.column(1));
    let block = DMatrix::from_row_slice(3, 3, &[sigma_inv2, rho, rho, rho, 1.0, tau, rho, tau, 1.0]);
    let sigma = &basis * block * basis.transpose();
    let p0 = &v0 * v0.transpose();
    let sigma_inv = &p0 * &sigma * &p0;
    let inv = linalg::solve_spd(&sigma, &DMatrix::identity(3, 3))?;
    let numeric = trace_prod(&inv, &sigma_inv);

    if (numeric - closed_form).abs() > 1e-10 * closed_form.abs().max(1.0) {
        return Err(Error::Matrix(format!(
            "closed form {closed_form} disagrees with direct evaluation {numeric}"
        )));
    }
    Ok(PermTrace { closed_form, numeric })
}

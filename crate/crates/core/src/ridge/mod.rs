//! Invariant ridge regression: estimators, exact conditional risk,
//! asymptotic deterministic equivalents and Monte Carlo harnesses.
//!
//! Throughout, `lambda == 0.0` means the ridgeless (minimum-norm) limit,
//! computed with a pseudoinverse whose relative cutoff is
//! [`crate::linalg::PINV_RCOND`] on the eigenvalues of the sample covariance.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupAction;

pub mod asymptotic;
pub mod estimator;
pub mod minimal;
pub mod montecarlo;
pub mod risk;

pub use asymptotic::{deterministic_risk, kappa_fixed_point, DeterministicRisk, KappaFixedPoint};
pub use estimator::{augmentation_equivalence_check, estimator_map, fit};
pub use minimal::{coupling_factor, minimal_alpha, minimal_kappa, theorem3_limits, Theorem3Report};
pub use montecarlo::{monte_carlo_risk, monte_carlo_risks, noise_only_risk, MonteCarloSummary};
pub use risk::{bias_variance_conditional, expected_risk_underparam, perm_example_trace, BiasVariance, PermTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    Vanilla,
    TestSymmetrized,
    AugmentedInvariant,
}

impl EstimatorMode {
    pub const ALL: [EstimatorMode; 3] =
        [EstimatorMode::Vanilla, EstimatorMode::TestSymmetrized, EstimatorMode::AugmentedInvariant];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorMode::Vanilla => "vanilla",
            EstimatorMode::TestSymmetrized => "test_symmetrized",
            EstimatorMode::AugmentedInvariant => "augmented",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla" => Ok(EstimatorMode::Vanilla),
            "test_symmetrized" | "symmetrized" | "test-symmetrized" => Ok(EstimatorMode::TestSymmetrized),
            "augmented" | "augmented_invariant" | "invariant" => Ok(EstimatorMode::AugmentedInvariant),
            other => Err(Error::Parse(format!("unknown estimator mode '{other}'"))),
        }
    }
}

/// Population model `y = x^T beta + eps`, `x ~ N(0, sigma)`, with the
/// invariant projection of the acting group.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub sigma: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub noise: f64,
    pub n: usize,
    pub lambda: f64,
    pub p0: DMatrix<f64>,
}

impl RidgeProblem {
    pub fn new(
        sigma: DMatrix<f64>,
        beta: DVector<f64>,
        noise: f64,
        n: usize,
        lambda: f64,
        group: &GroupAction,
    ) -> Result<Self> {
        let d = sigma.nrows();
        let p0 = group.invariant_projection_for(d)?;
        Self::with_projection(sigma, beta, noise, n, lambda, p0)
    }

    pub fn with_projection(
        sigma: DMatrix<f64>,
        beta: DVector<f64>,
        noise: f64,
        n: usize,
        lambda: f64,
        p0: DMatrix<f64>,
    ) -> Result<Self> {
        let d = sigma.nrows();
        if sigma.ncols() != d {
            return Err(Error::Dimension { expected: d, got: sigma.ncols() });
        }
        if beta.len() != d {
            return Err(Error::Dimension { expected: d, got: beta.len() });
        }
        if p0.shape() != (d, d) {
            return Err(Error::Dimension { expected: d, got: p0.nrows() });
        }
        if n == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("ridge parameter must be >= 0, got {lambda}")));
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::Config(format!("noise level must be >= 0, got {noise}")));
        }
        Ok(RidgeProblem { sigma, beta, noise, n, lambda, p0 })
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn invariant_dim(&self) -> usize {
        self.p0.trace().round() as usize
    }

    /// `P0 Sigma P0`.
    pub fn sigma_inv(&self) -> DMatrix<f64> {
        &self.p0 * &self.sigma * &self.p0
    }

    /// True when `P0 beta = beta` within 1e-10.
    pub fn beta_is_invariant(&self) -> bool {
        (&self.p0 * &self.beta - &self.beta).amax() < 1e-10
    }

    /// Population excess risk `(beta - b)^T Sigma (beta - b)`.
    pub fn excess_risk(&self, estimate: &DVector<f64>) -> f64 {
        let e = &self.beta - estimate;
        e.dot(&(&self.sigma * &e))
    }
}

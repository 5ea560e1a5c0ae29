//! Closed forms for the minimal covariance model in the ridgeless limit.
//!
//! With `d_c` coupling modes of strength `s` and weak directions of strength
//! `w`, the effective ridge `kappa(s, w, g)` is the nonnegative root of
//! `kappa^2 + b kappa + c = 0` with
//! `b = (s + w) - gamma_c s - (g - gamma_c) w` and `c = (1 - g) s w`,
//! obtained by clearing denominators in
//! `1 = gamma_c s / (s + kappa) + (g - gamma_c) w / (w + kappa)`.
//! The vanilla estimator uses `(sigma_c, sigma_w, gamma)`, the augmented one
//! `((sigma_c + sigma_w) / 2, sigma_w, gamma0)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(s: f64, w: f64, g: f64, gamma_c: f64) -> Result<()> {
    if !(s > 0.0 && w >= 0.0 && gamma_c > 0.0 && g > gamma_c) {
        return Err(Error::Domain(format!(
            "minimal model needs s > 0, w >= 0, g > gamma_c > 0; got s={s}, w={w}, g={g}, gamma_c={gamma_c}"
        )));
    }
    Ok(())
}

pub fn minimal_kappa(s: f64, w: f64, g: f64, gamma_c: f64) -> Result<f64> {
    check(s, w, g, gamma_c)?;
    let b = (s + w) - gamma_c * s - (g - gamma_c) * w;
    let c = (1.0 - g) * s * w;
    let disc = (b * b - 4.0 * c).max(0.0).sqrt();
    let root = if b >= 0.0 {
        let den = b + disc;
        if den == 0.0 { 0.0 } else { -2.0 * c / den }
    } else {
        (-b + disc) / 2.0
    };
    Ok(root.max(0.0))
}

/// `alpha(s, w, g) = gamma_c (s/(s+k))^2 + (g - gamma_c) (w/(w+k))^2`.
pub fn minimal_alpha(s: f64, w: f64, g: f64, gamma_c: f64) -> Result<f64> {
    let k = minimal_kappa(s, w, g, gamma_c)?;
    let frac = |x: f64| if x + k == 0.0 { 0.0 } else { x / (x + k) };
    Ok(gamma_c * frac(s).powi(2) + (g - gamma_c) * frac(w).powi(2))
}

/// Share of `|beta|^2` carried by the first `d_c` invariant basis vectors.
pub fn coupling_factor(beta: &DVector<f64>, v0: &DMatrix<f64>, d_c: usize) -> f64 {
    let norm2 = beta.norm_squared();
    if norm2 == 0.0 {
        return 0.0;
    }
    (0..d_c.min(v0.ncols())).map(|k| v0.column(k).dot(beta).powi(2)).sum::<f64>() / norm2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub gamma: f64,
    pub gamma0: f64,
    pub gamma_c: f64,
    pub sigma_c: f64,
    pub sigma_w: f64,
    pub sigma_bar: f64,
    pub coupling: f64,
    pub kappa: f64,
    pub kappa_inv: f64,
    pub alpha: f64,
    pub alpha_inv: f64,
    pub bias_vanilla: f64,
    pub bias_augmented: f64,
    pub variance_vanilla: f64,
    pub variance_augmented: f64,
    /// `w -> 0` limits of `alpha` and `alpha_inv`.
    pub alpha_limit: f64,
    pub alpha_inv_limit: f64,
    /// Common `w -> 0` bias when `gamma_c > 1`; zero when `gamma_c < 1`.
    pub bias_limit: f64,
    /// `gamma0 - gamma_c / 2 < 1/2`.
    pub correlation_condition: bool,
    /// Augmentation predicted to have the larger variance.
    pub augmentation_variance_larger: bool,
}

/// Ridgeless strong-correlation analysis of the minimal model. `coupling` is
/// `C(beta)`, `beta_norm2` is `|beta|^2` and `noise` the noise std.
#[allow(clippy::too_many_arguments)]
pub fn theorem3_limits(
    sigma_c: f64,
    sigma_w: f64,
    gamma: f64,
    gamma0: f64,
    gamma_c: f64,
    coupling: f64,
    beta_norm2: f64,
    noise: f64,
) -> Result<Theorem3Report> {
    if gamma_c == 1.0 || gamma0 == 1.0 || gamma == 1.0 {
        return Err(Error::Regime("aspect ratio exactly at an interpolation threshold".into()));
    }
    if !(gamma > 1.0 && gamma0 > 1.0) {
        return Err(Error::Regime(format!(
            "strong-correlation limits need gamma, gamma0 > 1; got {gamma}, {gamma0}"
        )));
    }
    if !(0.0..=1.0 + 1e-12).contains(&coupling) {
        return Err(Error::Domain(format!("coupling factor {coupling} outside [0, 1]")));
    }
    let sigma_bar = 0.5 * (sigma_c + sigma_w);
    let kappa = minimal_kappa(sigma_c, sigma_w, gamma, gamma_c)?;
    let kappa_inv = minimal_kappa(sigma_bar, sigma_w, gamma0, gamma_c)?;
    let alpha = minimal_alpha(sigma_c, sigma_w, gamma, gamma_c)?;
    let alpha_inv = minimal_alpha(sigma_bar, sigma_w, gamma0, gamma_c)?;
    let ratio = |x: f64, k: f64| if x + k == 0.0 { 0.0 } else { x / (x + k).powi(2) };
    let bias_vanilla = kappa * kappa * beta_norm2 / (1.0 - alpha)
        * (ratio(sigma_c, kappa) * coupling / 2.0 + ratio(sigma_w, kappa) * (1.0 - coupling / 2.0));
    let bias_augmented = kappa_inv * kappa_inv * beta_norm2 / (1.0 - alpha_inv)
        * (ratio(sigma_bar, kappa_inv) * coupling + ratio(sigma_w, kappa_inv) * (1.0 - coupling));
    let s2 = noise * noise;
    let (alpha_limit, alpha_inv_limit, bias_limit) = if gamma_c < 1.0 {
        let lim = |g: f64| gamma_c + (1.0 - gamma_c).powi(2) / (g - gamma_c);
        (lim(gamma), lim(gamma0), 0.0)
    } else {
        (1.0 / gamma_c, 1.0 / gamma_c, sigma_c * (gamma_c - 1.0) * coupling * beta_norm2 / (2.0 * gamma_c))
    };
    Ok(Theorem3Report {
        gamma,
        gamma0,
        gamma_c,
        sigma_c,
        sigma_w,
        sigma_bar,
        coupling,
        kappa,
        kappa_inv,
        alpha,
        alpha_inv,
        bias_vanilla,
        bias_augmented,
        variance_vanilla: s2 * alpha / (1.0 - alpha),
        variance_augmented: s2 * alpha_inv / (1.0 - alpha_inv),
        alpha_limit,
        alpha_inv_limit,
        bias_limit,
        correlation_condition: gamma0 - gamma_c / 2.0 < 0.5,
        augmentation_variance_larger: alpha_inv > alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupAction;
    use crate::ridge::{deterministic_risk, EstimatorMode, RidgeProblem};
    use crate::synthdata::minimal_model_covariance;

    #[test]
    fn isotropic_case() {
        for (s, g) in [(1.0, 2.0), (0.3, 5.0), (2.0, 1.5)] {
            let k = minimal_kappa(s, s, g, 0.4).unwrap();
            assert!((k - s * (g - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weak_strength() {
        assert!((minimal_kappa(2.0, 0.0, 5.0, 3.0).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(minimal_kappa(2.0, 0.0, 5.0, 0.5).unwrap(), 0.0);
        let a = minimal_alpha(1.0, 1e-9, 5.0, 2.0).unwrap();
        assert!((a - 0.5).abs() < 1e-6);
    }

    #[test]
    fn small_w_alpha_limit_below_one() {
        let (gc, g) = (0.5, 5.0);
        let a = minimal_alpha(1.0, 1e-9, g, gc).unwrap();
        assert!((a - (gc + (1.0 - gc).powi(2) / (g - gc))).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(minimal_kappa(1.0, 0.1, 0.3, 0.5).is_err());
        assert!(minimal_kappa(0.0, 0.1, 3.0, 0.5).is_err());
    }

    #[test]
    fn shared_bias_limit() {
        let r = theorem3_limits(1.0, 0.0, 5.0, 3.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        assert!((r.bias_limit - 0.25).abs() < 1e-15);
        assert!((r.bias_vanilla - 0.25).abs() < 1e-12);
        assert!((r.bias_augmented - 0.25).abs() < 1e-12);
        let r = theorem3_limits(1.0, 0.0, 5.0, 3.0, 2.0, 0.0, 1.0, 0.5).unwrap();
        assert_eq!(r.bias_limit, 0.0);
    }

    #[test]
    fn strong_correlation_below_one() {
        let r = theorem3_limits(1.0, 1e-7, 5.0, 2.0, 0.5, 0.4, 1.0, 0.5).unwrap();
        assert!(r.augmentation_variance_larger);
        assert!((r.alpha - 0.5 - 0.25 / 4.5).abs() < 1e-5);
        assert!((r.alpha_inv - 0.5 - 0.25 / 1.5).abs() < 1e-5);
        assert!(r.bias_vanilla < 1e-5 && r.bias_augmented < 1e-5);
        assert!(theorem3_limits(1.0, 0.1, 5.0, 1.0, 0.5, 0.4, 1.0, 0.5).is_err());
    }

    #[test]
    fn closed_forms_agree_with_generic_equivalents() {
        // n = 20, d = 100, d0 = 40, d_c = 10: gamma = 5, gamma0 = 2, gamma_c = 0.5
        let (n, d, d0, dc) = (20usize, 100usize, 40usize, 10usize);
        let g = GroupAction::permute_first(d - d0 + 1, d).unwrap();
        let mm = minimal_model_covariance(d, d0, dc, 1.0, 0.05, &g).unwrap();
        let beta = crate::synthdata::invariant_beta(&g, d, 1.0, 2).unwrap();
        let c = coupling_factor(&beta, &mm.v0, dc);
        let p = RidgeProblem::with_projection(mm.sigma.clone(), beta, 0.5, n, 0.0, mm.p0.clone()).unwrap();
        let van = deterministic_risk(&p, EstimatorMode::Vanilla).unwrap();
        let aug = deterministic_risk(&p, EstimatorMode::AugmentedInvariant).unwrap();
        let r = theorem3_limits(1.0, 0.05, 5.0, 2.0, 0.5, c, 1.0, 0.5).unwrap();
        assert!((van.kappa - r.kappa).abs() < 1e-10);
        assert!((aug.kappa - r.kappa_inv).abs() < 1e-10);
        assert!((van.variance - r.variance_vanilla).abs() < 1e-9);
        assert!((aug.variance - r.variance_augmented).abs() < 1e-9);
        assert!((van.bias - r.bias_vanilla).abs() < 1e-9, "{} vs {}", van.bias, r.bias_vanilla);
        assert!((aug.bias - r.bias_augmented).abs() < 1e-9, "{} vs {}", aug.bias, r.bias_augmented);
    }
}

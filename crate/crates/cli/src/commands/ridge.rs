//! `ridge-sim` and `ridge-theory`.
//!
//! Both use the minimal model: `d` features, an invariant subspace of
//! dimension `d0` (the group permutes the first `d - d0 + 1` coordinates),
//! and `d_c` coupling modes with scales `sigma_c`, `sigma_w`. The target
//! `beta` is a random invariant vector of norm `beta_norm`.

use std::io::Write;
use std::path::Path;

use clap::{Args, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symbreak::data::fmt17;
use symbreak::rng::{derive_seed, rng_from_seed};
use symbreak::ridge::{
    augmentation_equivalence_check, coupling_factor, deterministic_risk, monte_carlo_risks, theorem3_limits,
    DeterministicRisk,
};
use symbreak::synthdata::{invariant_beta, minimal_model_covariance};
use symbreak::{EstimatorMode, Error, GroupAction, Result, RidgeProblem};

use super::with_workers;
use crate::config::{resolve, write_json, CommonFlags, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Finite-sample risks (n=100, d=10, d0=4, unit noise) against closed forms.
    Thm1,
    /// Isotropic ridgeless risks (n=100, d=300, d0=200) against the asymptotic formulas.
    Thm2,
    /// Group-averaged vs invariant-feature estimator on 100 random problems.
    Equivalence,
}

macro_rules! minimal_args {
    ($name:ident { $($extra:tt)* }) => {
        #[derive(Debug, Clone, Default, Args, Serialize)]
        pub struct $name {
            /// Training samples.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub n: Option<usize>,
            /// Feature dimension.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub d: Option<usize>,
            /// Invariant subspace dimension.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub d0: Option<usize>,
            /// Coupling modes.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub d_c: Option<usize>,
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub sigma_c: Option<f64>,
            /// sigma_w values to sweep, comma separated.
            #[arg(long, value_delimiter = ',')]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub sigma_w: Option<Vec<f64>>,
            /// Label noise standard deviation.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub noise: Option<f64>,
            /// Ridge parameter; 0 is the pseudoinverse.
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub lambda: Option<f64>,
            #[arg(long)]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub beta_norm: Option<f64>,
            /// Estimators: vanilla, test_symmetrized, augmented.
            #[arg(long, value_delimiter = ',')]
            #[serde(skip_serializing_if = "Option::is_none")]
            pub modes: Option<Vec<String>>,
            $($extra)*
        }
    };
}

minimal_args!(RidgeSimArgs {
    /// Monte Carlo trials per sigma_w.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Add deterministic-equivalent columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory: Option<bool>,
    /// Write check tables instead of the sweep (repeatable or comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<Vec<Check>>,
    /// Monte Carlo trials for thm1 and thm2 checks.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_trials: Option<usize>,
});

minimal_args!(RidgeTheoryArgs {});

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalParams {
    pub n: usize,
    pub d: usize,
    pub d0: usize,
    pub d_c: usize,
    pub sigma_c: f64,
    pub sigma_w: Vec<f64>,
    pub noise: f64,
    pub lambda: f64,
    pub beta_norm: f64,
    pub modes: Vec<String>,
}

impl Default for MinimalParams {
    fn default() -> Self {
        MinimalParams {
            n: 100,
            d: 500,
            d0: 200,
            d_c: 50,
            sigma_c: 1.0,
            sigma_w: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            noise: 0.5,
            lambda: 1e-8,
            beta_norm: 1.0,
            modes: vec!["vanilla".into(), "augmented".into()],
        }
    }
}

// Unknown keys are rejected during resolution; serde cannot combine
// `deny_unknown_fields` with `flatten`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeSimParams {
    #[serde(flatten)]
    pub model: MinimalParams,
    pub trials: usize,
    pub theory: bool,
    pub check: Vec<Check>,
    pub check_trials: usize,
}

impl Default for RidgeSimParams {
    fn default() -> Self {
        RidgeSimParams { model: MinimalParams::default(), trials: 200, theory: false, check: Vec::new(), check_trials: 2000 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeTheoryParams {
    #[serde(flatten)]
    pub model: MinimalParams,
}

struct Setup {
    group: GroupAction,
    beta: DVector<f64>,
    modes: Vec<EstimatorMode>,
}

impl MinimalParams {
    fn setup(&self, seed: u64) -> Result<Setup> {
        if self.d0 == 0 || self.d0 > self.d {
            return Err(Error::Config(format!("d0={} must be in [1, d={}]", self.d0, self.d)));
        }
        if self.sigma_w.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("sigma_w and modes must be non-empty".into()));
        }
        let modes = self.modes.iter().map(|m| m.parse()).collect::<Result<Vec<EstimatorMode>>>()?;
        let group = GroupAction::permute_first(self.d - self.d0 + 1, self.d)?;
        let beta = invariant_beta(&group, self.d, self.beta_norm, derive_seed(seed, 0))?;
        Ok(Setup { group, beta, modes })
    }

    fn problem(&self, s: &Setup, sigma_w: f64) -> Result<RidgeProblem> {
        let model = minimal_model_covariance(self.d, self.d0, self.d_c, self.sigma_c, sigma_w, &s.group)?;
        RidgeProblem::new(model.sigma, s.beta.clone(), self.noise, self.n, self.lambda, &s.group)
    }
}

fn csv_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn run_sim(file: Option<Map<String, Value>>, args: &RidgeSimArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<RidgeSimParams, _>("ridge-sim", file, args, common)?;
    if r.params.trials == 0 || r.params.check_trials == 0 {
        return Err(Error::Config("trials and check_trials must be positive".into()));
    }
    if !r.params.check.is_empty() {
        r.prepare_output()?;
        return with_workers(&r, || {
            for &c in &r.params.check {
                run_check(&r, c)?;
            }
            Ok(())
        });
    }
    let m = &r.params.model;
    let setup = m.setup(r.seed)?;
    r.prepare_output()?;
    let mut f = csv_file(&r.path("ridge_sim.csv"))?;
    write!(f, "sigma_w,mode,mean_risk,std_risk,trials")?;
    if r.params.theory {
        write!(f, ",theory_risk,theory_bias,theory_variance,theory_kappa")?;
    }
    writeln!(f)?;
    for (i, &sw) in m.sigma_w.iter().enumerate() {
        let problem = m.problem(&setup, sw)?;
        let mc = with_workers(&r, || {
            monte_carlo_risks(&problem, &setup.modes, r.params.trials, derive_seed(derive_seed(r.seed, 1), i as u64))
        })?;
        for s in &mc {
            write!(f, "{},{},{},{},{}", fmt17(sw), s.mode, fmt17(s.mean), fmt17(s.std), r.params.trials)?;
            if r.params.theory {
                let t = deterministic_risk(&problem, s.mode)?;
                write!(f, ",{},{},{},{}", fmt17(t.risk), fmt17(t.bias), fmt17(t.variance), fmt17(t.kappa))?;
            }
            writeln!(f)?;
            println!("sigma_w={sw} {:>16}: mean risk {:.6} (std {:.6})", s.mode.name(), s.mean, s.std);
        }
    }
    f.flush()?;
    Ok(())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn write_mc_table(path: &Path, rows: &[(EstimatorMode, f64, f64, f64)]) -> Result<f64> {
    let mut f = csv_file(path)?;
    writeln!(f, "mode,monte_carlo,std_err,formula,rel_error")?;
    let mut worst: f64 = 0.0;
    for &(mode, mc, se, formula) in rows {
        let e = rel(mc, formula);
        worst = worst.max(e);
        writeln!(f, "{},{},{},{},{}", mode, fmt17(mc), fmt17(se), fmt17(formula), fmt17(e))?;
    }
    f.flush()?;
    Ok(worst)
}

fn run_check(r: &Resolved<RidgeSimParams>, check: Check) -> Result<()> {
    let seed = derive_seed(r.seed, 100 + check as u64);
    let trials = r.params.check_trials;
    match check {
        Check::Thm1 => {
            let (n, d, d0) = (100usize, 10usize, 4usize);
            let group = GroupAction::permute_first(d - d0 + 1, d)?;
            let mut rng = rng_from_seed(derive_seed(seed, 0));
            let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
            let sigma = group.symmetrize_covariance(&(&a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1))?;
            let beta = invariant_beta(&group, d, 1.0, derive_seed(seed, 1))?;
            let problem = RidgeProblem::new(sigma, beta, 1.0, n, 0.0, &group)?;
            let mc = monte_carlo_risks(&problem, &EstimatorMode::ALL, trials, derive_seed(seed, 2))?;
            let (nf, df, d0f) = (n as f64, d as f64, d0 as f64);
            let formulas = [df / (nf - df - 1.0), d0f / (nf - df - 1.0), d0f / (nf - d0f - 1.0)];
            let rows: Vec<_> = mc.iter().zip(formulas).map(|(s, t)| (s.mode, s.mean, s.std_err, t)).collect();
            let worst = write_mc_table(&r.path("check_thm1.csv"), &rows)?;
            println!("thm1: max relative error {:.3}% over {trials} trials", 100.0 * worst);
        }
        Check::Thm2 => {
            let (n, d, d0) = (100usize, 300usize, 200usize);
            let group = GroupAction::permute_first(d - d0 + 1, d)?;
            let beta = invariant_beta(&group, d, 1.0, derive_seed(seed, 1))?;
            let problem = RidgeProblem::new(DMatrix::identity(d, d), beta, 1.0, n, 0.0, &group)?;
            let modes = [EstimatorMode::Vanilla, EstimatorMode::AugmentedInvariant];
            let mc = monte_carlo_risks(&problem, &modes, trials, derive_seed(seed, 2))?;
            let limit = |g: f64| (1.0 - 1.0 / g) + 1.0 / (g - 1.0);
            let formulas = [limit(d as f64 / n as f64), limit(d0 as f64 / n as f64)];
            let rows: Vec<_> = mc.iter().zip(formulas).map(|(s, t)| (s.mode, s.mean, s.std_err, t)).collect();
            let worst = write_mc_table(&r.path("check_thm2.csv"), &rows)?;
            println!("thm2: max relative error {:.3}% over {trials} trials", 100.0 * worst);
        }
        Check::Equivalence => {
            let group = GroupAction::parse("sym:n=3", None)?;
            let mut rng = rng_from_seed(derive_seed(seed, 0));
            let mut f = csv_file(&r.path("check_equivalence.csv"))?;
            writeln!(f, "instance,n,lambda,max_deviation")?;
            let mut worst: f64 = 0.0;
            for i in 0..100 {
                let n = rng.random_range(2..=20);
                let lambda = if rng.random_bool(0.25) { 0.0 } else { rng.random_range(1e-3..2.0) };
                let x = DMatrix::<f64>::from_fn(n, 3, |_, _| rng.sample(StandardNormal));
                let y = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
                let dev = augmentation_equivalence_check(&x, &y, lambda, &group)?;
                worst = worst.max(dev);
                writeln!(f, "{i},{n},{},{}", fmt17(lambda), fmt17(dev))?;
            }
            f.flush()?;
            println!("equivalence: max deviation {worst:.3e} over 100 instances");
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LimitsFile {
    beta_norm2: f64,
    coupling: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    reports: Vec<symbreak::ridge::Theorem3Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

pub fn run_theory(file: Option<Map<String, Value>>, args: &RidgeTheoryArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<RidgeTheoryParams, _>("ridge-theory", file, args, common)?;
    let m = &r.params.model;
    let setup = m.setup(r.seed)?;
    r.prepare_output()?;
    let mut f = csv_file(&r.path("theory.csv"))?;
    writeln!(f, "sigma_w,mode,kappa,bias,variance,risk,diverged")?;
    let mut coupling = f64::NAN;
    for &sw in &m.sigma_w {
        let problem = m.problem(&setup, sw)?;
        for &mode in &setup.modes {
            let t: DeterministicRisk = deterministic_risk(&problem, mode)?;
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                fmt17(sw),
                mode,
                fmt17(t.kappa),
                fmt17(t.bias),
                fmt17(t.variance),
                fmt17(t.risk),
                t.diverged
            )?;
        }
        if coupling.is_nan() {
            let model = minimal_model_covariance(m.d, m.d0, m.d_c, m.sigma_c, sw, &setup.group)?;
            coupling = coupling_factor(&setup.beta, &model.v0, m.d_c);
        }
    }
    f.flush()?;

    let beta_norm2 = setup.beta.norm_squared();
    let (n, d, d0, dc) = (m.n as f64, m.d as f64, m.d0 as f64, m.d_c as f64);
    let mut out = LimitsFile { beta_norm2, coupling, reports: Vec::new(), skipped: None };
    for &sw in &m.sigma_w {
        match theorem3_limits(m.sigma_c, sw, d / n, d0 / n, dc / n, coupling, beta_norm2, m.noise) {
            Ok(rep) => out.reports.push(rep),
            Err(e @ (Error::Regime(_) | Error::Domain(_))) => {
                out.reports.clear();
                out.skipped = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    write_json(&r.path("limits.json"), &out)?;
    match &out.skipped {
        Some(why) => println!("strong-correlation limits skipped: {why}"),
        None => {
            for rep in &out.reports {
                println!(
                    "sigma_w={}: bias vanilla {:.6} augmented {:.6}, variance vanilla {:.6} augmented {:.6}",
                    rep.sigma_w, rep.bias_vanilla, rep.bias_augmented, rep.variance_vanilla, rep.variance_augmented
                );
            }
        }
    }
    Ok(())
}

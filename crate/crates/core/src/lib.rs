//! Measuring distributional symmetry breaking in datasets, and exact and
//! asymptotic risk of invariant ridge regression.

pub mod classifier;
pub mod data;
pub mod error;
pub mod groups;
pub mod hypothesis;
pub mod linalg;
pub mod mmd;
pub mod nn;
pub mod ridge;
pub mod rng;
pub mod stats;
pub mod synthdata;
pub mod taskdep;

pub use data::{LabelSpace, LabeledDataset, Sample};
pub use error::{Error, Result};
pub use groups::{GroupAction, GroupElement};
pub use ridge::{BiasVariance, DeterministicRisk, EstimatorMode, RidgeProblem};
pub use synthdata::{DetectionDataset, OrbitDistribution};

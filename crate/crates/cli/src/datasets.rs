//! Dataset specifications accepted by `--data`.
//!
//! * `clouds[:aniso=A][,points=M]`: anisotropic Gaussian point clouds
//! * `orbit[:r=R][,theta=one_hot|uniform|w1;w2;...]`: one planar orbit under `c<R>`
//! * `swiss[:p=P]`: two interleaved spirals, a `p` fraction of one lifted
//! * `file:PATH` or any path ending in `.csv`: a dataset written by `synth`

use std::path::Path;

use symbreak::data::read_dataset;
use symbreak::groups::GroupAction;
use symbreak::rng::derive_seed;
use symbreak::synthdata::{canonicalized_clouds, generic_planar_point, orbit_dataset, swiss_roll, OrbitDistribution};
use symbreak::{Error, LabeledDataset, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Clouds { anisotropy: f64, points: usize },
    Orbit { r: usize, theta: OrbitDistribution },
    Swiss { p: f64 },
    File(String),
}

fn kv(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{pair}'")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("invalid value '{v}' for '{key}'")))
}

impl DataSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(path) = text.strip_prefix("file:") {
            return Ok(DataSpec::File(path.to_string()));
        }
        if text.ends_with(".csv") {
            return Ok(DataSpec::File(text.to_string()));
        }
        let (kind, body) = text.split_once(':').unwrap_or((text, ""));
        let pairs = kv(body)?;
        let unknown = |k: &str| Error::Parse(format!("unknown parameter '{k}' for data kind '{kind}'"));
        match kind {
            "clouds" => {
                let (mut anisotropy, mut points) = (16.0, 10);
                for (k, v) in pairs {
                    match k.as_str() {
                        "aniso" | "anisotropy" => anisotropy = num(&k, &v)?,
                        "points" | "m" => points = num(&k, &v)?,
                        _ => return Err(unknown(&k)),
                    }
                }
                Ok(DataSpec::Clouds { anisotropy, points })
            }
            "orbit" => {
                let mut r = 4;
                let mut theta_text = "one_hot".to_string();
                for (k, v) in pairs {
                    match k.as_str() {
                        "r" => r = num(&k, &v)?,
                        "theta" => theta_text = v,
                        _ => return Err(unknown(&k)),
                    }
                }
                if r == 0 {
                    return Err(Error::Parse("orbit size must be positive".into()));
                }
                let theta = match theta_text.as_str() {
                    "one_hot" | "onehot" => OrbitDistribution::one_hot(r, 0),
                    "uniform" => OrbitDistribution::uniform(r),
                    list => OrbitDistribution::new(
                        list.split(';').map(|w| num::<f64>("theta", w)).collect::<Result<Vec<_>>>()?,
                    )?,
                };
                if theta.r() != r {
                    return Err(Error::Parse(format!("theta has {} weights for r={r}", theta.r())));
                }
                Ok(DataSpec::Orbit { r, theta })
            }
            "swiss" | "swiss_roll" => {
                let mut p = 0.0;
                for (k, v) in pairs {
                    match k.as_str() {
                        "p" => p = num(&k, &v)?,
                        _ => return Err(unknown(&k)),
                    }
                }
                Ok(DataSpec::Swiss { p })
            }
            other => Err(Error::Parse(format!("unknown data kind '{other}'"))),
        }
    }

    /// `n` items drawn with `seed`; files ignore both and load every item.
    pub fn generate(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        match self {
            DataSpec::Clouds { anisotropy, points } => canonicalized_clouds(n, *points, *anisotropy, seed),
            DataSpec::Orbit { r, theta } => orbit_dataset(&GroupAction::cyclic(*r), &generic_planar_point(), theta, n, seed),
            DataSpec::Swiss { p } => swiss_roll(n, *p, seed),
            DataSpec::File(path) => read_dataset(Path::new(path)),
        }
    }

    /// Train and test splits. Generated data uses independent substreams; a
    /// file is split into its first `n_train` items and the remainder.
    pub fn splits(&self, n_train: usize, n_test: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        match self {
            DataSpec::File(_) => {
                let all = self.generate(0, seed)?;
                if n_train == 0 || n_train >= all.len() {
                    return Err(Error::Config(format!(
                        "n_train={n_train} must be in [1, {}) for a file with {} items",
                        all.len(),
                        all.len()
                    )));
                }
                Ok(all.split_at(n_train))
            }
            _ => Ok((self.generate(n_train, derive_seed(seed, 1))?, self.generate(n_test, derive_seed(seed, 2))?)),
        }
    }
}

pub fn parse_group(text: &str) -> Result<GroupAction> {
    GroupAction::parse(text, None)
}

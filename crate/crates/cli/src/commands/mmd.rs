use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use symbreak::hypothesis::MEDIAN_PAIRS;
use symbreak::mmd::{median_bandwidth, mmd, KernelKind, KernelSpec};
use symbreak::rng::{derive_seed, rng_from_seed};
use symbreak::{Error, Result, Sample};

use super::require;
use crate::config::{resolve, write_json, CommonFlags};
use crate::datasets::{parse_group, DataSpec};

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct MmdArgs {
    /// First dataset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    /// Second dataset; without it the second sample is a transformed copy.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<String>,
    /// Group used to transform the second sample when --other is absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Items drawn from each generated dataset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// naive, chamfer or hausdorff.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Bandwidth; the median heuristic on the pooled samples when unset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdParams {
    pub data: Option<String>,
    pub other: Option<String>,
    pub group: Option<String>,
    pub n: usize,
    pub kernel: String,
    pub sigma: Option<f64>,
}

impl Default for MmdParams {
    fn default() -> Self {
        MmdParams { data: None, other: None, group: None, n: 200, kernel: KernelKind::Chamfer.to_string(), sigma: None }
    }
}

#[derive(Debug, Serialize)]
struct MmdFile {
    mmd: f64,
    xx_mean: f64,
    yy_mean: f64,
    xy_mean: f64,
    kernel: String,
    sigma: f64,
    n_x: usize,
    n_y: usize,
    seed: u64,
}

pub fn run(file: Option<Map<String, Value>>, args: &MmdArgs, common: &CommonFlags) -> Result<()> {
    let r = resolve::<MmdParams, _>("mmd", file, args, common)?;
    let p = &r.params;
    let data = DataSpec::parse(require(&p.data, "data")?)?;
    let kind: KernelKind = p
        .kernel
        .parse()
        .map_err(|_| Error::Config(format!("unknown kernel '{}' (naive, chamfer, hausdorff)", p.kernel)))?;
    let group = match (&p.other, &p.group) {
        (Some(_), Some(_)) => return Err(Error::Config("give either other or group, not both".into())),
        (None, None) => return Err(Error::Config("missing required setting 'group' (flag --group) or 'other'".into())),
        (None, Some(g)) => Some(parse_group(g)?),
        (Some(_), None) => None,
    };
    let other = p.other.as_deref().map(DataSpec::parse).transpose()?;
    if let Some(s) = p.sigma {
        KernelSpec::new(kind, s)?;
    }
    r.prepare_output()?;

    let xs: Vec<Sample> = data.generate(p.n, derive_seed(r.seed, 1))?.items;
    let ys: Vec<Sample> = match (other, group) {
        (Some(o), _) => o.generate(p.n, derive_seed(r.seed, 2))?.items,
        (None, Some(g)) => {
            let base = data.generate(p.n, derive_seed(r.seed, 2))?.items;
            let mut rng = rng_from_seed(derive_seed(r.seed, 3));
            base.iter().map(|s| g.apply(&g.haar_sample(&mut rng), s)).collect::<Result<_>>()?
        }
        (None, None) => unreachable!(),
    };
    let sigma = match p.sigma {
        Some(s) => s,
        None => {
            let pooled: Vec<Sample> = xs.iter().chain(&ys).cloned().collect();
            median_bandwidth(kind, &pooled, MEDIAN_PAIRS, derive_seed(r.seed, 4))?
        }
    };
    let res = mmd(&xs, &ys, &KernelSpec::new(kind, sigma)?)?;
    write_json(
        &r.path("mmd.json"),
        &MmdFile {
            mmd: res.value,
            xx_mean: res.xx_mean,
            yy_mean: res.yy_mean,
            xy_mean: res.xy_mean,
            kernel: kind.to_string(),
            sigma,
            n_x: xs.len(),
            n_y: ys.len(),
            seed: r.seed,
        },
    )?;
    println!("MMD^2 = {:.6e} ({} kernel, sigma {:.6})", res.value, kind, sigma);
    Ok(())
}

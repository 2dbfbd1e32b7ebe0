//! Run configuration: a TOML file whose sections can be overridden by flags.
//!
//! ```toml
//! [env]
//! kind = "synthetic"
//! horizon = 3
//!
//! [policy]
//! kind = "tabular_sigmoid"
//! prior = { family = "gaussian", mean = 0.0, std = 1.0 }
//!
//! [plan]
//! n = 1000
//! m = 1000
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environments::{EnvId, EnvSpec, NoiseConfig, RewardFamily, RewardShape};
use crate::error::{Error, Result};
use crate::evolution::EsConfig;
use crate::infometrics::MetricOptions;
use crate::policies::{ArchitectureSpec, PolicySpec, PriorSpec};
use crate::rollout::SamplingPlan;
use crate::scoring::BagConfig;

pub const WORKERS_ENV: &str = "PIC_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default = "PlanSection::default_n")]
    pub n: usize,
    #[serde(default = "PlanSection::default_m")]
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; never part of the config digest.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl PlanSection {
    fn default_n() -> usize {
        1000
    }

    fn default_m() -> usize {
        1000
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        SamplingPlan::new(self.n, self.m, self.seed)
    }
}

impl Default for PlanSection {
    fn default() -> Self {
        Self { n: Self::default_n(), m: Self::default_m(), seed: 0, workers: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Not part of the config digest.
    #[serde(default, skip_serializing)]
    pub dir: Option<PathBuf>,
    /// Store sampled parameter vectors in the matrix sidecar.
    #[serde(default)]
    pub save_params: bool,
    /// Also write each ES epoch's return matrix.
    #[serde(default)]
    pub save_matrices: bool,
    #[serde(default)]
    pub svg: bool,
}

/// Subset of the architecture bag; empty lists mean the full set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BagSection {
    #[serde(default)]
    pub layers: Vec<Vec<usize>>,
    #[serde(default)]
    pub priors: Vec<PriorSpec>,
    #[serde(default)]
    pub bias: Vec<bool>,
}

impl BagSection {
    pub fn specs(&self) -> Vec<PolicySpec> {
        let layers = if self.layers.is_empty() { ArchitectureSpec::bag_layers() } else { self.layers.clone() };
        let priors = if self.priors.is_empty() { PriorSpec::bag() } else { self.priors.clone() };
        let bias = if self.bias.is_empty() { vec![true, false] } else { self.bias.clone() };
        let mut out = Vec::new();
        for l in &layers {
            for p in &priors {
                for &b in &bias {
                    out.push(PolicySpec::mlp(ArchitectureSpec::new(l.clone(), b), p.clone()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EsSection {
    #[serde(flatten)]
    pub cfg: EsConfig,
    /// Scalar initial means, each broadcast to every parameter; one trace per value.
    #[serde(default)]
    pub mu0_sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingSection {
    #[serde(default = "ShapingSection::default_policy")]
    pub policy: PolicySpec,
    /// Reward variants; empty means the sixteen standard ones.
    #[serde(default)]
    pub variants: Vec<RewardShape>,
}

impl ShapingSection {
    fn default_policy() -> PolicySpec {
        PolicySpec::mlp(ArchitectureSpec::new(vec![4, 4], false), PriorSpec::standard_normal())
    }

    pub fn variants(&self) -> Vec<RewardShape> {
        if self.variants.is_empty() {
            RewardShape::sweep_variants()
        } else {
            self.variants.clone()
        }
    }
}

impl Default for ShapingSection {
    fn default() -> Self {
        Self { policy: Self::default_policy(), variants: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub env: Option<EnvSpec>,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default)]
    pub plan: PlanSection,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub bag: BagSection,
    #[serde(default)]
    pub es: EsSection,
    #[serde(default)]
    pub score: Option<BagConfig>,
    #[serde(default)]
    pub shaping: ShapingSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn env(&self) -> Result<&EnvSpec> {
        self.env.as_ref().ok_or_else(|| Error::InvalidSpec("missing [env] section or --env flag".into()))
    }

    /// Configured policy, or the default for the environment.
    pub fn policy(&self) -> Result<PolicySpec> {
        if let Some(p) = &self.policy {
            return Ok(p.clone());
        }
        Ok(match self.env()?.id {
            EnvId::Synthetic { .. } => PolicySpec::tabular_sigmoid(PriorSpec::standard_normal()),
            _ => PolicySpec::mlp(ArchitectureSpec::linear(), PriorSpec::standard_normal()),
        })
    }

    /// Hex SHA-256 of the canonical JSON form (worker count excluded).
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// Environment from a short name, as accepted by `--env`.
pub fn env_from_name(name: &str, horizon: Option<usize>, noise: NoiseConfig) -> Result<EnvSpec> {
    let id = match name {
        "synthetic" => EnvId::Synthetic { horizon: horizon.unwrap_or(3) },
        "cartpole" => EnvId::Cartpole { noise },
        "pendulum" => EnvId::Pendulum,
        "mountain_car" | "mountaincar" => EnvId::MountainCar,
        "mountain_car_continuous" | "mountaincarcontinuous" => EnvId::MountainCarContinuous,
        "acrobot" => EnvId::Acrobot,
        "pointmaze" => EnvId::Pointmaze { reward: RewardFamily::new(RewardShape::L2 { alpha: 1.0 }) },
        "constant" => EnvId::Constant { reward: 1.0, horizon: horizon.unwrap_or(1) },
        other => return Err(Error::InvalidSpec(format!("unknown environment `{other}`"))),
    };
    if horizon.is_some() && !matches!(id, EnvId::Synthetic { .. } | EnvId::Constant { .. }) {
        let spec = EnvSpec::new(id)?;
        if Some(spec.horizon) != horizon {
            return Err(Error::SpecMismatch(format!("{} has horizon {}", spec.name(), spec.horizon)));
        }
        return Ok(spec);
    }
    EnvSpec::new(id)
}

/// Worker count from the flag, then the environment variable, then the machine.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

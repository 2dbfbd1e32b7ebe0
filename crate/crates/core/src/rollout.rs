//! Random policy sampling: N parameter particles, M episodes each.
//!
//! Rows are computed in parallel on the ambient rayon pool. Each row draws
//! from its own counter-keyed streams, so the matrix does not depend on the
//! number of workers or on scheduling.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{make_env, EnvSpec};
use crate::error::{Error, Result};
use crate::policies::{Policy, PolicySpec};
use crate::rng::{StreamKey, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n_particles: usize,
    pub episodes_per_particle: usize,
    pub master_seed: u64,
    /// Second component of every stream key; separates e.g. ES epochs or
    /// bag members that share a master seed.
    #[serde(default)]
    pub stream_group: u64,
}

impl SamplingPlan {
    pub fn new(n_particles: usize, episodes_per_particle: usize, master_seed: u64) -> Self {
        Self { n_particles, episodes_per_particle, master_seed, stream_group: 0 }
    }

    pub fn with_group(mut self, group: u64) -> Self {
        self.stream_group = group;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 || self.episodes_per_particle < 1 {
            return Err(Error::InvalidSpec(format!(
                "sampling plan needs N >= 2 and M >= 1, got N={} M={}",
                self.n_particles, self.episodes_per_particle
            )));
        }
        Ok(())
    }

    fn key(&self, particle: usize, episode: usize) -> StreamKey {
        StreamKey::new(self.master_seed, self.stream_group, particle as u64, episode as u64)
    }
}

/// N x M episodic returns with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnMatrix {
    n: usize,
    m: usize,
    #[serde(skip)]
    returns: Vec<f64>,
    pub env_spec: EnvSpec,
    /// One entry per contributing policy spec; more than one after a merge.
    pub policy_specs: Vec<PolicySpec>,
    pub plan: SamplingPlan,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<Vec<f64>>>,
}

impl ReturnMatrix {
    /// Builds a matrix from rows, validating shape and finiteness.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        env_spec: EnvSpec,
        policy_specs: Vec<PolicySpec>,
        plan: SamplingPlan,
    ) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::Empty("return matrix"));
        }
        let mut returns = Vec::with_capacity(n * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: row.len() });
            }
            returns.extend(row);
        }
        Self::from_flat(n, m, returns, env_spec, policy_specs, plan)
    }

    fn from_flat(
        n: usize,
        m: usize,
        returns: Vec<f64>,
        env_spec: EnvSpec,
        policy_specs: Vec<PolicySpec>,
        plan: SamplingPlan,
    ) -> Result<Self> {
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Degenerate("non-finite return".into()));
        }
        let r_min = returns.iter().copied().fold(f64::INFINITY, f64::min);
        let r_max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { n, m, returns, env_spec, policy_specs, plan, r_min, r_max, params: None })
    }

    /// Convenience constructor for tests and tools with no real provenance.
    pub fn from_values(rows: Vec<Vec<f64>>) -> Result<Self> {
        let plan = SamplingPlan::new(rows.len(), rows.first().map_or(0, Vec::len), 0);
        let env = EnvSpec::new(crate::environments::EnvId::Constant { reward: 0.0, horizon: 1 })?;
        Self::from_rows(rows, env, Vec::new(), plan)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.returns[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.returns.chunks(self.m)
    }

    pub fn values(&self) -> &[f64] {
        &self.returns
    }

    pub fn mean(&self) -> f64 {
        crate::infometrics::sorted_sum(self.returns.clone()) / self.returns.len() as f64
    }

    pub fn row_means(&self) -> Vec<f64> {
        self.rows().map(|r| crate::infometrics::sorted_sum(r.to_vec()) / self.m as f64).collect()
    }

    /// Sidecar path for a CSV path: `returns.csv` -> `returns.csv.json`.
    pub fn sidecar_path(csv: &Path) -> PathBuf {
        let mut s = csv.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes `particle,episode,return` rows plus the JSON sidecar.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["particle", "episode", "return"])?;
        for (i, row) in self.rows().enumerate() {
            for (j, r) in row.iter().enumerate() {
                w.write_record([i.to_string(), j.to_string(), format!("{r:?}")])?;
            }
        }
        w.flush()?;
        let mut side = BufWriter::new(File::create(Self::sidecar_path(path))?);
        serde_json::to_writer_pretty(&mut side, self)?;
        side.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let side: ReturnMatrix = serde_json::from_reader(BufReader::new(File::open(Self::sidecar_path(path))?))?;
        let mut returns = vec![f64::NAN; side.n * side.m];
        let mut r = csv::Reader::from_path(path)?;
        for rec in r.deserialize() {
            let (i, j, v): (usize, usize, f64) = rec?;
            if i >= side.n || j >= side.m {
                return Err(Error::InvalidSpec(format!("entry ({i}, {j}) outside {}x{}", side.n, side.m)));
            }
            returns[i * side.m + j] = v;
        }
        let mut out = Self::from_flat(side.n, side.m, returns, side.env_spec, side.policy_specs, side.plan)?;
        out.params = side.params;
        Ok(out)
    }
}

/// Rolls out one parameter vector for `m` episodes of row `particle`.
fn run_row(
    env_spec: &EnvSpec,
    policy: &Policy,
    theta: &[f64],
    plan: &SamplingPlan,
    particle: usize,
) -> Result<Vec<f64>> {
    let mut env = make_env(env_spec)?;
    let mut actor = policy.actor(theta)?;
    let mut out = Vec::with_capacity(plan.episodes_per_particle);
    for j in 0..plan.episodes_per_particle {
        let key = plan.key(particle, j);
        let mut noise = key.rng(Tag::PolicyNoise);
        let mut state = env.reset(key.seed_u64(Tag::EnvReset));
        let mut ret = 0.0;
        for _ in 0..env_spec.horizon {
            let t = env.step(&actor.act(&state, &mut noise)?);
            ret += t.reward;
            state = t.next_state;
            if t.done {
                break;
            }
        }
        out.push(ret);
    }
    Ok(out)
}

fn bind(env_spec: &EnvSpec, policy_spec: &PolicySpec) -> Result<Policy> {
    env_spec.validate()?;
    Policy::new(policy_spec, env_spec.state_dim, &env_spec.action_space)
}

/// Samples `plan.n_particles` parameter vectors from the policy prior.
pub fn sample_particles(env_spec: &EnvSpec, policy_spec: &PolicySpec, plan: &SamplingPlan) -> Result<Vec<Vec<f64>>> {
    let policy = bind(env_spec, policy_spec)?;
    Ok((0..plan.n_particles).map(|i| policy.sample_params(&mut plan.key(i, 0).rng(Tag::Params))).collect())
}

/// Draws N particles from the prior and runs M episodes each.
pub fn collect_returns(env_spec: &EnvSpec, policy_spec: &PolicySpec, plan: &SamplingPlan) -> Result<ReturnMatrix> {
    plan.validate()?;
    let params = sample_particles(env_spec, policy_spec, plan)?;
    evaluate_params(env_spec, policy_spec, &params, plan)
}

/// Runs M episodes for each of the given parameter vectors.
pub fn evaluate_params(
    env_spec: &EnvSpec,
    policy_spec: &PolicySpec,
    params: &[Vec<f64>],
    plan: &SamplingPlan,
) -> Result<ReturnMatrix> {
    if plan.episodes_per_particle == 0 || params.is_empty() {
        return Err(Error::Empty("particles or episodes"));
    }
    let policy = bind(env_spec, policy_spec)?;
    let rows = params
        .par_iter()
        .enumerate()
        .map(|(i, theta)| run_row(env_spec, &policy, theta, plan, i))
        .collect::<Result<Vec<_>>>()?;
    let plan = SamplingPlan { n_particles: params.len(), ..*plan };
    ReturnMatrix::from_rows(rows, env_spec.clone(), vec![policy_spec.clone()], plan)
}

/// Row-concatenates matrices collected on the same environment with the same M.
pub fn merge(matrices: &[ReturnMatrix]) -> Result<ReturnMatrix> {
    let first = matrices.first().ok_or(Error::Empty("matrix list"))?;
    let mut returns = Vec::new();
    let mut specs = Vec::new();
    let mut params = Some(Vec::new());
    for mat in matrices {
        if mat.env_spec != first.env_spec {
            return Err(Error::SpecMismatch(format!(
                "cannot merge {} with {}",
                mat.env_spec.name(),
                first.env_spec.name()
            )));
        }
        if mat.m != first.m {
            return Err(Error::DimensionMismatch { expected: first.m, got: mat.m });
        }
        returns.extend_from_slice(&mat.returns);
        specs.extend(mat.policy_specs.iter().cloned());
        params = match (params, &mat.params) {
            (Some(mut acc), Some(p)) => {
                acc.extend(p.iter().cloned());
                Some(acc)
            }
            _ => None,
        };
    }
    let n = returns.len() / first.m;
    let plan = SamplingPlan { n_particles: n, ..first.plan };
    let mut out = ReturnMatrix::from_flat(n, first.m, returns, first.env_spec.clone(), specs, plan)?;
    out.params = params;
    Ok(out)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

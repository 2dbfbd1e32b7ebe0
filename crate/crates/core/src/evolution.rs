//! Evolution strategies over the mean of a Gaussian parameter prior, with
//! the information metrics measured on every epoch's own rollouts.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environments::EnvSpec;
use crate::error::{Error, Result};
use crate::infometrics::{compute_report, MetricOptions};
use crate::policies::{Policy, PolicySpec, PriorSpec};
use crate::rng::{StreamKey, Tag};
use crate::rollout::{evaluate_params, ReturnMatrix, SamplingPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsConfig {
    /// Initial prior mean; empty means all zeros.
    pub mu0: Vec<f64>,
    pub sigma: f64,
    pub population: usize,
    pub episodes_per_particle: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub rank_normalize: bool,
    pub antithetic: bool,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            mu0: Vec::new(),
            sigma: 0.1,
            population: 100,
            episodes_per_particle: 100,
            learning_rate: 1.0,
            epochs: 200,
            rank_normalize: false,
            antithetic: false,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 1e-12) || !self.sigma.is_finite() {
            return Err(Error::InvalidSpec(format!("exploration std must be positive, got {}", self.sigma)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidSpec(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.population < 2 || self.episodes_per_particle < 1 {
            return Err(Error::InvalidSpec("population needs >= 2 members and >= 1 episode each".into()));
        }
        if self.antithetic && !self.population.is_multiple_of(2) {
            return Err(Error::InvalidSpec("antithetic sampling needs an even population".into()));
        }
        Ok(())
    }
}

/// Maps fitness to centred ranks in `[-0.5, 0.5]`; ties share their mean rank.
pub fn centered_ranks(fitness: &[f64]) -> Vec<f64> {
    let n = fitness.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let mut ranks = vec![0.0; n];
    let mut k = 0;
    while k < n {
        let mut end = k;
        while end + 1 < n && fitness[order[end + 1]] == fitness[order[k]] {
            end += 1;
        }
        let r = (k + end) as f64 / 2.0;
        for &i in &order[k..=end] {
            ranks[i] = r / (n - 1) as f64 - 0.5;
        }
        k = end + 1;
    }
    ranks
}

/// One ES update of the prior mean.
pub fn es_step(
    mu: &[f64],
    sigma: f64,
    learning_rate: f64,
    rank_normalize: bool,
    fitness: &[f64],
    perturbations: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if fitness.len() != perturbations.len() {
        return Err(Error::DimensionMismatch { expected: perturbations.len(), got: fitness.len() });
    }
    if fitness.is_empty() {
        return Err(Error::Empty("population"));
    }
    let shaped = if rank_normalize {
        centered_ranks(fitness)
    } else {
        let mean = fitness.iter().sum::<f64>() / fitness.len() as f64;
        fitness.iter().map(|f| f - mean).collect()
    };
    let scale = learning_rate / (fitness.len() as f64 * sigma);
    let mut out = mu.to_vec();
    for (f, eps) in shaped.iter().zip(perturbations) {
        if eps.len() != mu.len() {
            return Err(Error::DimensionMismatch { expected: mu.len(), got: eps.len() });
        }
        for (o, e) in out.iter_mut().zip(eps) {
            *o += scale * f * e;
        }
    }
    Ok(out)
}

/// Standard normal perturbations for one epoch.
pub fn sample_perturbations(seed: u64, group: u64, population: usize, dim: usize, antithetic: bool) -> Vec<Vec<f64>> {
    let draw = |i: usize| -> Vec<f64> {
        let mut rng = StreamKey::new(seed, group, i as u64, 0).rng(Tag::EsNoise);
        (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    if antithetic {
        (0..population)
            .map(|i| {
                let e = draw(i / 2);
                if i % 2 == 0 {
                    e
                } else {
                    e.iter().map(|x| -x).collect()
                }
            })
            .collect()
    } else {
        (0..population).map(draw).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsRecord {
    pub epoch: usize,
    pub mu: Vec<f64>,
    pub mean_return: f64,
    pub pic: Option<f64>,
    pub poic: Option<f64>,
    pub eta_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EsTrace {
    pub records: Vec<EsRecord>,
    pub final_mu: Vec<f64>,
}

impl EsTrace {
    /// First epoch whose mean return reaches `level`.
    pub fn epochs_to_reach(&self, level: f64) -> Option<usize> {
        self.records.iter().find(|r| r.mean_return >= level).map(|r| r.epoch)
    }

    pub fn poic_series(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.poic).collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "mean_return", "pic", "poic", "eta_star"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                format!("{:?}", r.mean_return),
                opt(r.pic),
                opt(r.poic),
                opt(r.eta_star),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains the prior mean with ES. `metrics` enables per-epoch PIC/POIC; the
/// observer sees each epoch's return matrix.
pub fn train_es(
    env_spec: &EnvSpec,
    policy_spec: &PolicySpec,
    cfg: &EsConfig,
    seed: u64,
    metrics: Option<&MetricOptions>,
    mut observer: impl FnMut(usize, &ReturnMatrix),
) -> Result<EsTrace> {
    cfg.validate()?;
    let dim =
        Policy::new(&policy_spec.with_prior(PriorSpec::standard_normal()), env_spec.state_dim, &env_spec.action_space)?
            .param_count();
    let mut mu = if cfg.mu0.is_empty() { vec![0.0; dim] } else { cfg.mu0.clone() };
    if mu.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: mu.len() });
    }
    let mut trace = EsTrace::default();
    for epoch in 0..cfg.epochs {
        let eps = sample_perturbations(seed, epoch as u64, cfg.population, dim, cfg.antithetic);
        let params: Vec<Vec<f64>> =
            eps.iter().map(|e| mu.iter().zip(e).map(|(m, x)| m + cfg.sigma * x).collect()).collect();
        let plan = SamplingPlan::new(cfg.population, cfg.episodes_per_particle, seed).with_group(epoch as u64);
        let spec = policy_spec.with_prior(PriorSpec::gaussian(mu.clone(), cfg.sigma));
        let mut mat = evaluate_params(env_spec, &spec, &params, &plan)?;
        mat.params = Some(params);
        observer(epoch, &mat);
        let fitness = mat.row_means();
        let (pic, poic, eta) = match metrics {
            Some(opts) => {
                let r = compute_report(&mat, opts)?;
                (Some(r.pic), Some(r.poic), Some(r.eta_star))
            }
            None => (None, None, None),
        };
        trace.records.push(EsRecord { epoch, mu: mu.clone(), mean_return: mat.mean(), pic, poic, eta_star: eta });
        mu = es_step(&mu, cfg.sigma, cfg.learning_rate, cfg.rank_normalize, &fitness, &eps)?;
    }
    trace.final_mu = mu;
    Ok(trace)
}

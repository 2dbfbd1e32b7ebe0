//! Brute-force normalized scores and a small derivative-free algorithm bag.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::environments::EnvSpec;
use crate::error::{Error, Result};
use crate::evolution::{es_step, sample_perturbations};
use crate::infometrics::sorted_sum;
use crate::policies::{Policy, PolicySpec, PriorSpec};
use crate::rng::{StreamKey, Tag};
use crate::rollout::{evaluate_params, sample_particles, ReturnMatrix, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreInputs {
    pub r_ave: f64,
    pub r_min_rand: f64,
    pub r_max_rand: f64,
    #[serde(default)]
    pub r_max_algo: Option<f64>,
}

/// `(r_ave - r_min) / (max(r_max_rand, r_max_algo) - r_min)`, unclamped.
pub fn normalized_score(inputs: &ScoreInputs) -> Result<f64> {
    let top = inputs.r_max_algo.map_or(inputs.r_max_rand, |a| a.max(inputs.r_max_rand));
    let denom = top - inputs.r_min_rand;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!("score denominator {denom} is not positive")));
    }
    Ok((inputs.r_ave - inputs.r_min_rand) / denom)
}

/// Normalized score with the mean random-sampling return as the average.
pub fn random_sampling_score(m: &ReturnMatrix, r_max_algo: Option<f64>) -> Result<f64> {
    if m.r_max <= m.r_min {
        return Err(Error::Degenerate("constant return matrix".into()));
    }
    normalized_score(&ScoreInputs { r_ave: m.mean(), r_min_rand: m.r_min, r_max_rand: m.r_max, r_max_algo })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    /// Best of `k` prior draws.
    RandomSearch {
        k: usize,
    },
    Cem {
        population: usize,
        elite_frac: f64,
        iters: usize,
    },
    /// Rank-normalized ES on the parameter mean, starting from zero.
    Es {
        population: usize,
        sigma: f64,
        lr: f64,
        iters: usize,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::RandomSearch { .. } => "random_search",
            AlgorithmSpec::Cem { .. } => "cem",
            AlgorithmSpec::Es { .. } => "es",
        }
    }

    pub fn hyperparams(&self) -> String {
        match self {
            AlgorithmSpec::RandomSearch { k } => format!("k={k}"),
            AlgorithmSpec::Cem { population, elite_frac, iters } => {
                format!("pop={population};elite={elite_frac};iters={iters}")
            }
            AlgorithmSpec::Es { population, sigma, lr, iters } => {
                format!("pop={population};sigma={sigma};lr={lr};iters={iters}")
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            AlgorithmSpec::RandomSearch { k } => *k >= 1,
            AlgorithmSpec::Cem { population, elite_frac, iters } => {
                *population >= 2 && *elite_frac > 0.0 && *elite_frac <= 1.0 && *iters >= 1
            }
            AlgorithmSpec::Es { population, sigma, lr, iters } => {
                *population >= 2 && *sigma > 0.0 && *lr > 0.0 && *iters >= 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("bad algorithm budget: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagConfig {
    pub algorithms: Vec<AlgorithmSpec>,
    pub seeds: Vec<u64>,
    /// Episodes per candidate while optimizing.
    #[serde(default = "BagConfig::default_fitness_episodes")]
    pub fitness_episodes: usize,
    /// Fresh episodes used to score each final solution.
    #[serde(default = "BagConfig::default_eval_episodes")]
    pub eval_episodes: usize,
}

impl BagConfig {
    fn default_fitness_episodes() -> usize {
        4
    }

    fn default_eval_episodes() -> usize {
        100
    }

    /// Random search, CEM and three ES variants at desk-scale budgets.
    pub fn desk() -> Self {
        Self {
            algorithms: vec![
                AlgorithmSpec::RandomSearch { k: 200 },
                AlgorithmSpec::Cem { population: 40, elite_frac: 0.2, iters: 20 },
                AlgorithmSpec::Es { population: 40, sigma: 0.1, lr: 0.05, iters: 20 },
                AlgorithmSpec::Es { population: 40, sigma: 0.5, lr: 0.2, iters: 20 },
                AlgorithmSpec::Es { population: 40, sigma: 1.0, lr: 1.0, iters: 20 },
            ],
            seeds: vec![0, 1, 2],
            fitness_episodes: Self::default_fitness_episodes(),
            eval_episodes: Self::default_eval_episodes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagRow {
    pub algorithm: String,
    pub hyperparams: String,
    pub env: String,
    pub seed: u64,
    pub mean_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagResult {
    pub rows: Vec<BagRow>,
    pub r_ave_algo: f64,
    pub r_max_algo: f64,
}

impl BagResult {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["algorithm", "hyperparams", "env", "mean_return"])?;
        for r in &self.rows {
            w.write_record([
                r.algorithm.clone(),
                r.hyperparams.clone(),
                r.env.clone(),
                format!("{:?}", r.mean_return),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Ctx<'a> {
    env: &'a EnvSpec,
    policy: &'a PolicySpec,
    seed: u64,
    algo: u64,
    episodes: usize,
}

impl Ctx<'_> {
    fn plan(&self, n: usize, step: u64) -> SamplingPlan {
        SamplingPlan::new(n, self.episodes, self.seed).with_group((self.algo << 32) | step)
    }

    fn fitness(&self, params: &[Vec<f64>], step: u64) -> Result<Vec<f64>> {
        Ok(evaluate_params(self.env, self.policy, params, &self.plan(params.len(), step))?.row_means())
    }

    fn gaussian(&self, mean: &[f64], std: &[f64], n: usize, step: u64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut rng = StreamKey::new(self.seed, (self.algo << 32) | step, i as u64, 1).rng(Tag::Bag);
                mean.iter()
                    .zip(std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

fn optimize(algo: &AlgorithmSpec, ctx: &Ctx, dim: usize) -> Result<Vec<f64>> {
    match *algo {
        AlgorithmSpec::RandomSearch { k } => {
            let plan = ctx.plan(k, 0);
            let cands = sample_particles(ctx.env, ctx.policy, &plan)?;
            let f = ctx.fitness(&cands, 0)?;
            Ok(cands[argmax(&f)].clone())
        }
        AlgorithmSpec::Cem { population, elite_frac, iters } => {
            let mut mean = vec![0.0; dim];
            let mut std = vec![1.0; dim];
            let n_elite = ((population as f64 * elite_frac).ceil() as usize).clamp(1, population);
            for t in 0..iters as u64 {
                let cands = ctx.gaussian(&mean, &std, population, t);
                let f = ctx.fitness(&cands, t)?;
                let mut order: Vec<usize> = (0..population).collect();
                order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
                let elite = &order[..n_elite];
                for d in 0..dim {
                    let m = elite.iter().map(|&i| cands[i][d]).sum::<f64>() / n_elite as f64;
                    let v = elite.iter().map(|&i| (cands[i][d] - m).powi(2)).sum::<f64>() / n_elite as f64;
                    mean[d] = m;
                    std[d] = v.sqrt().max(1e-3);
                }
            }
            Ok(mean)
        }
        AlgorithmSpec::Es { population, sigma, lr, iters } => {
            let mut mu = vec![0.0; dim];
            for t in 0..iters as u64 {
                let eps = sample_perturbations(ctx.seed, (ctx.algo << 32) | t, population, dim, false);
                let cands: Vec<Vec<f64>> =
                    eps.iter().map(|e| mu.iter().zip(e).map(|(m, x)| m + sigma * x).collect()).collect();
                let f = ctx.fitness(&cands, t)?;
                mu = es_step(&mu, sigma, lr, true, &f, &eps)?;
            }
            Ok(mu)
        }
    }
}

/// Runs every (algorithm, seed) pair and scores its final solution.
pub fn run_bag(env_spec: &EnvSpec, policy_spec: &PolicySpec, bag: &BagConfig) -> Result<BagResult> {
    if bag.algorithms.is_empty() || bag.seeds.is_empty() {
        return Err(Error::Empty("algorithm bag"));
    }
    if bag.fitness_episodes == 0 || bag.eval_episodes == 0 {
        return Err(Error::InvalidSpec("bag episode counts must be positive".into()));
    }
    bag.algorithms.iter().try_for_each(AlgorithmSpec::validate)?;
    let dim = Policy::new(policy_spec, env_spec.state_dim, &env_spec.action_space)?.param_count();
    // ES-style candidates carry their own distribution; the spec's prior only matters for random search
    let flat = policy_spec.with_prior(PriorSpec::standard_normal());
    let mut rows = Vec::new();
    for (a, algo) in bag.algorithms.iter().enumerate() {
        for &seed in &bag.seeds {
            let policy = if matches!(algo, AlgorithmSpec::RandomSearch { .. }) { policy_spec } else { &flat };
            let ctx = Ctx { env: env_spec, policy, seed, algo: a as u64 + 1, episodes: bag.fitness_episodes };
            let theta = optimize(algo, &ctx, dim)?;
            let eval_plan = SamplingPlan::new(1, bag.eval_episodes, seed).with_group(u64::MAX - a as u64);
            let eval = evaluate_params(env_spec, &flat, &[theta], &eval_plan)?;
            rows.push(BagRow {
                algorithm: algo.name().to_string(),
                hyperparams: algo.hyperparams(),
                env: env_spec.name(),
                seed,
                mean_return: eval.mean(),
            });
        }
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.mean_return).collect();
    let r_ave_algo = sorted_sum(scores.clone()) / scores.len() as f64;
    let r_max_algo = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BagResult { rows, r_ave_algo, r_max_algo })
}

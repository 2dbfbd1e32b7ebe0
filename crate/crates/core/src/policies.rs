//! Parametric policy families.
//!
//! A policy is a deterministic tanh MLP over a flat parameter vector, or the
//! 3-parameter stochastic sigmoid policy used on the synthetic chain MDP.
//! Flat layout, layer by layer: weights row-major as `[fan_out][fan_in]`,
//! then `fan_out` biases when the architecture has them.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::environments::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    #[serde(default)]
    pub hidden_layers: Vec<usize>,
    #[serde(default)]
    pub use_bias: bool,
    #[serde(default)]
    pub activation: Activation,
}

impl ArchitectureSpec {
    pub fn new(hidden_layers: Vec<usize>, use_bias: bool) -> Self {
        Self { hidden_layers, use_bias, activation: Activation::Tanh }
    }

    pub fn linear() -> Self {
        Self::new(Vec::new(), false)
    }

    /// The seven depth/width combinations of the architecture bag.
    pub fn bag_layers() -> Vec<Vec<usize>> {
        vec![vec![], vec![4], vec![32], vec![64], vec![4, 4], vec![32, 32], vec![64, 64]]
    }

    pub fn label(&self) -> String {
        let widths: Vec<String> = self.hidden_layers.iter().map(|w| w.to_string()).collect();
        format!("[{}]{}", widths.join("x"), if self.use_bias { "+b" } else { "" })
    }

    /// `(fan_in, fan_out)` per layer, output layer last.
    pub fn layer_shapes(&self, state_dim: usize, out_dim: usize) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut fan_in = state_dim;
        for &w in &self.hidden_layers {
            shapes.push((fan_in, w));
            fan_in = w;
        }
        shapes.push((fan_in, out_dim));
        shapes
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::InvalidSpec("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// Prior mean: a scalar broadcast to every parameter or a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorMean {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PriorMean {
    fn at(&self, k: usize) -> f64 {
        match self {
            PriorMean::Scalar(m) => *m,
            PriorMean::Vector(v) => v[k],
        }
    }
}

impl Default for PriorMean {
    fn default() -> Self {
        PriorMean::Scalar(0.0)
    }
}

fn one() -> f64 {
    1.0
}

fn minus_one() -> f64 {
    -1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    Gaussian {
        #[serde(default)]
        mean: PriorMean,
        #[serde(default = "one")]
        std: f64,
    },
    Uniform {
        #[serde(default = "minus_one")]
        low: f64,
        #[serde(default = "one")]
        high: f64,
    },
    XavierNormal,
    XavierUniform,
}

impl PriorSpec {
    pub fn standard_normal() -> Self {
        PriorSpec::Gaussian { mean: PriorMean::Scalar(0.0), std: 1.0 }
    }

    pub fn gaussian(mean: Vec<f64>, std: f64) -> Self {
        PriorSpec::Gaussian { mean: PriorMean::Vector(mean), std }
    }

    pub fn unit_uniform() -> Self {
        PriorSpec::Uniform { low: -1.0, high: 1.0 }
    }

    /// The four prior families of the architecture bag.
    pub fn bag() -> Vec<PriorSpec> {
        vec![Self::standard_normal(), Self::unit_uniform(), PriorSpec::XavierNormal, PriorSpec::XavierUniform]
    }

    pub fn label(&self) -> String {
        match self {
            PriorSpec::Gaussian { mean: PriorMean::Scalar(m), std } => format!("gaussian({m},{std})"),
            PriorSpec::Gaussian { std, .. } => format!("gaussian(mu,{std})"),
            PriorSpec::Uniform { low, high } => format!("uniform({low},{high})"),
            PriorSpec::XavierNormal => "xavier_normal".into(),
            PriorSpec::XavierUniform => "xavier_uniform".into(),
        }
    }

    fn validate(&self, count: usize) -> Result<()> {
        match self {
            PriorSpec::Gaussian { mean, std } => {
                if !(*std > 0.0) || !std.is_finite() {
                    return Err(Error::InvalidSpec(format!("gaussian prior needs std > 0, got {std}")));
                }
                if let PriorMean::Vector(v) = mean {
                    if v.len() != count {
                        return Err(Error::DimensionMismatch { expected: count, got: v.len() });
                    }
                }
            }
            PriorSpec::Uniform { low, high } if !(low < high) => {
                return Err(Error::InvalidSpec(format!("uniform prior needs low < high, got [{low}, {high}]")));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Mlp {
        arch: ArchitectureSpec,
        prior: PriorSpec,
    },
    /// `P(a1 | s) = sigmoid(theta . s)` on the synthetic chain.
    TabularSigmoid {
        prior: PriorSpec,
    },
}

impl PolicySpec {
    pub fn mlp(arch: ArchitectureSpec, prior: PriorSpec) -> Self {
        PolicySpec::Mlp { arch, prior }
    }

    pub fn tabular_sigmoid(prior: PriorSpec) -> Self {
        PolicySpec::TabularSigmoid { prior }
    }

    /// All 56 (architecture, prior, bias) combinations, in a fixed order.
    pub fn bag() -> Vec<PolicySpec> {
        let mut out = Vec::with_capacity(56);
        for layers in ArchitectureSpec::bag_layers() {
            for prior in PriorSpec::bag() {
                for use_bias in [true, false] {
                    out.push(PolicySpec::mlp(ArchitectureSpec::new(layers.clone(), use_bias), prior.clone()));
                }
            }
        }
        out
    }

    pub fn prior(&self) -> &PriorSpec {
        match self {
            PolicySpec::Mlp { prior, .. } | PolicySpec::TabularSigmoid { prior } => prior,
        }
    }

    pub fn with_prior(&self, prior: PriorSpec) -> Self {
        match self {
            PolicySpec::Mlp { arch, .. } => PolicySpec::Mlp { arch: arch.clone(), prior },
            PolicySpec::TabularSigmoid { .. } => PolicySpec::TabularSigmoid { prior },
        }
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::Mlp { arch, prior } => format!("mlp{}/{}", arch.label(), prior.label()),
            PolicySpec::TabularSigmoid { prior } => format!("sigmoid/{}", prior.label()),
        }
    }
}

/// Number of parameters of an MLP architecture on the given env shape.
pub fn param_count(arch: &ArchitectureSpec, state_dim: usize, action_space: &ActionSpace) -> usize {
    arch.layer_shapes(state_dim, action_space.output_dim())
        .iter()
        .map(|&(i, o)| i * o + if arch.use_bias { o } else { 0 })
        .sum()
}

/// A policy spec bound to an environment shape.
#[derive(Debug, Clone)]
pub struct Policy {
    spec: PolicySpec,
    action_space: ActionSpace,
    state_dim: usize,
    layers: Vec<(usize, usize)>,
    use_bias: bool,
    count: usize,
}

impl Policy {
    pub fn new(spec: &PolicySpec, state_dim: usize, action_space: &ActionSpace) -> Result<Self> {
        action_space.validate()?;
        let (layers, use_bias) = match spec {
            PolicySpec::Mlp { arch, .. } => {
                arch.validate()?;
                (arch.layer_shapes(state_dim, action_space.output_dim()), arch.use_bias)
            }
            PolicySpec::TabularSigmoid { .. } => {
                if state_dim != 3 || *action_space != ActionSpace::discrete(2) {
                    return Err(Error::SpecMismatch(
                        "tabular sigmoid policy pairs only with the synthetic chain".into(),
                    ));
                }
                (vec![(3, 1)], false)
            }
        };
        let count = layers.iter().map(|&(i, o)| i * o + if use_bias { o } else { 0 }).sum();
        spec.prior().validate(count)?;
        Ok(Self { spec: spec.clone(), action_space: action_space.clone(), state_dim, layers, use_bias, count })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.count
    }

    /// Offsets `(weights, bias)` of each layer in the flat vector.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.layers
            .iter()
            .map(|&(i, o)| {
                let w = at;
                at += i * o;
                let b = at;
                if self.use_bias {
                    at += o;
                }
                (w, b)
            })
            .collect()
    }

    /// One draw from the prior.
    pub fn sample_params(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.count);
        match self.spec.prior() {
            PriorSpec::Gaussian { mean, std } => {
                for k in 0..self.count {
                    let z: f64 = StandardNormal.sample(rng);
                    theta.push(mean.at(k) + std * z);
                }
            }
            PriorSpec::Uniform { low, high } => {
                let u = Uniform::new_inclusive(*low, *high).expect("validated bounds");
                theta.extend((0..self.count).map(|_| u.sample(rng)));
            }
            PriorSpec::XavierNormal => {
                for &(i, o) in &self.layers {
                    let n = Normal::new(0.0, (2.0 / (i + o) as f64).sqrt()).expect("positive std");
                    let len = i * o + if self.use_bias { o } else { 0 };
                    theta.extend((0..len).map(|_| n.sample(rng)));
                }
            }
            PriorSpec::XavierUniform => {
                for &(i, o) in &self.layers {
                    let a = (6.0 / (i + o) as f64).sqrt();
                    let len = i * o + if self.use_bias { o } else { 0 };
                    theta.extend((0..len).map(|_| rng.random_range(-a..=a)));
                }
            }
        }
        theta
    }

    /// Binds a parameter vector, checking its length once.
    pub fn actor<'a>(&'a self, theta: &'a [f64]) -> Result<Actor<'a>> {
        if theta.len() != self.count {
            return Err(Error::DimensionMismatch { expected: self.count, got: theta.len() });
        }
        let width = self.layers.iter().map(|&(_, o)| o).max().unwrap_or(0).max(self.state_dim);
        Ok(Actor { policy: self, theta, offsets: self.offsets(), a: vec![0.0; width], b: vec![0.0; width] })
    }

    /// Convenience one-shot action; allocates scratch space per call.
    pub fn act(&self, theta: &[f64], state: &[f64], rng: &mut StreamRng) -> Result<Action> {
        self.actor(theta)?.act(state, rng)
    }
}

/// A policy with fixed parameters and its own scratch buffers.
pub struct Actor<'a> {
    policy: &'a Policy,
    theta: &'a [f64],
    offsets: Vec<(usize, usize)>,
    a: Vec<f64>,
    b: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Actor<'_> {
    /// Raw output-layer pre-activations for `state`.
    pub fn forward(&mut self, state: &[f64]) -> Result<&[f64]> {
        let p = self.policy;
        if state.len() != p.state_dim {
            return Err(Error::DimensionMismatch { expected: p.state_dim, got: state.len() });
        }
        self.a[..state.len()].copy_from_slice(state);
        let last = p.layers.len() - 1;
        for (l, (&(fi, fo), &(w, bo))) in p.layers.iter().zip(&self.offsets).enumerate() {
            for o in 0..fo {
                let row = &self.theta[w + o * fi..w + (o + 1) * fi];
                let mut z: f64 = row.iter().zip(&self.a[..fi]).map(|(x, y)| x * y).sum();
                if p.use_bias {
                    z += self.theta[bo + o];
                }
                self.b[o] = if l == last { z } else { z.tanh() };
            }
            std::mem::swap(&mut self.a, &mut self.b);
        }
        Ok(&self.a[..p.layers[last].1])
    }

    pub fn act(&mut self, state: &[f64], rng: &mut StreamRng) -> Result<Action> {
        let tabular = matches!(self.policy.spec, PolicySpec::TabularSigmoid { .. });
        let space = self.policy.action_space.clone();
        let out = self.forward(state)?;
        if tabular {
            let u: f64 = rng.random();
            return Ok(Action::Discrete(if u < sigmoid(out[0]) { 0 } else { 1 }));
        }
        Ok(match space {
            ActionSpace::Discrete { .. } => {
                let mut best = 0;
                for (k, &z) in out.iter().enumerate() {
                    if z > out[best] {
                        best = k;
                    }
                }
                Action::Discrete(best)
            }
            ActionSpace::Continuous { low, high, .. } => Action::Continuous(
                out.iter()
                    .zip(low.iter().zip(&high))
                    .map(|(z, (lo, hi))| (lo + (z.tanh() + 1.0) * 0.5 * (hi - lo)).clamp(*lo, *hi))
                    .collect(),
            ),
        })
    }
}

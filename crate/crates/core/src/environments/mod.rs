//! Episodic environments behind one reset/step interface.
//!
//! Every environment is constructed from an [`EnvSpec`] and owns all of its
//! state, including its random stream, so instances never share anything.

mod classic;
mod pointmaze;
mod reward;
mod synthetic;

pub use classic::{Acrobot, CartPole, MountainCar, MountainCarContinuous, Pendulum};
pub use pointmaze::{Maze, PointMaze};
pub use reward::{shaped_reward, RewardFamily, RewardShape};
pub use synthetic::{synthetic_step, SyntheticMdp, SYNTHETIC_STATES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete { n: usize },
    Continuous { dim: usize, low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    pub fn discrete(n: usize) -> Self {
        ActionSpace::Discrete { n }
    }

    pub fn continuous_symmetric(dim: usize, bound: f64) -> Self {
        ActionSpace::Continuous { dim, low: vec![-bound; dim], high: vec![bound; dim] }
    }

    /// Width of the policy output layer.
    pub fn output_dim(&self) -> usize {
        match self {
            ActionSpace::Discrete { n } => *n,
            ActionSpace::Continuous { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ActionSpace::Discrete { n } if *n < 2 => {
                Err(Error::InvalidSpec(format!("discrete action space needs n >= 2, got {n}")))
            }
            ActionSpace::Continuous { dim, low, high } => {
                if *dim == 0 || low.len() != *dim || high.len() != *dim {
                    return Err(Error::InvalidSpec("continuous bounds must have length dim".into()));
                }
                if low.iter().zip(high).any(|(l, h)| !(l < h)) {
                    return Err(Error::InvalidSpec("continuous bounds need low < high".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// CartPole reset and transition noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Half-width of the uniform reset distribution on all four state dims.
    #[serde(default = "NoiseConfig::default_u_init")]
    pub u_init: f64,
    /// Half-width of uniform noise added to angular velocity each step.
    #[serde(default)]
    pub u_dyn: f64,
}

impl NoiseConfig {
    fn default_u_init() -> f64 {
        0.05
    }

    pub fn new(u_init: f64, u_dyn: f64) -> Self {
        Self { u_init, u_dyn }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { u_init: 0.05, u_dyn: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvId {
    Synthetic {
        horizon: usize,
    },
    Cartpole {
        #[serde(default, flatten)]
        noise: NoiseConfig,
    },
    Pendulum,
    MountainCar,
    MountainCarContinuous,
    Acrobot,
    Pointmaze {
        reward: RewardFamily,
    },
    /// Diagnostic environment paying a fixed reward once per episode.
    Constant {
        reward: f64,
        horizon: usize,
    },
}

impl EnvId {
    pub fn name(&self) -> String {
        match self {
            EnvId::Synthetic { horizon } => format!("synthetic_t{horizon}"),
            EnvId::Cartpole { noise } => {
                format!("cartpole_u{}_d{}", noise.u_init, noise.u_dyn)
            }
            EnvId::Pendulum => "pendulum".into(),
            EnvId::MountainCar => "mountain_car".into(),
            EnvId::MountainCarContinuous => "mountain_car_continuous".into(),
            EnvId::Acrobot => "acrobot".into(),
            EnvId::Pointmaze { reward } => format!("pointmaze_{}", reward.shape.label()),
            EnvId::Constant { reward, .. } => format!("constant_{reward}"),
        }
    }

    fn canonical(&self) -> Result<(usize, usize, ActionSpace)> {
        Ok(match self {
            EnvId::Synthetic { horizon } => {
                if !(1..=3).contains(horizon) {
                    return Err(Error::InvalidSpec(format!("synthetic horizon must be 1, 2 or 3, got {horizon}")));
                }
                (*horizon, 3, ActionSpace::discrete(2))
            }
            EnvId::Cartpole { noise } => {
                if !(noise.u_init >= 0.0 && noise.u_dyn >= 0.0) {
                    return Err(Error::InvalidSpec("cartpole noise must be non-negative".into()));
                }
                (200, 4, ActionSpace::discrete(2))
            }
            EnvId::Pendulum => (200, 3, ActionSpace::continuous_symmetric(1, 2.0)),
            EnvId::MountainCar => (200, 2, ActionSpace::discrete(3)),
            EnvId::MountainCarContinuous => (999, 2, ActionSpace::continuous_symmetric(1, 1.0)),
            EnvId::Acrobot => (500, 6, ActionSpace::discrete(3)),
            EnvId::Pointmaze { reward } => {
                reward.validate()?;
                if reward.goal.len() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, got: reward.goal.len() });
                }
                (150, 4, ActionSpace::continuous_symmetric(2, 1.0))
            }
            EnvId::Constant { horizon, reward } => {
                if *horizon == 0 || !reward.is_finite() {
                    return Err(Error::InvalidSpec("constant env needs horizon >= 1".into()));
                }
                (*horizon, 1, ActionSpace::discrete(2))
            }
        })
    }
}

/// Serialized form of an environment: the id plus optional explicit
/// properties, which must agree with the canonical ones when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawEnvSpec {
    #[serde(flatten)]
    id: EnvId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    episode_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action_space: Option<ActionSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvSpec", into = "RawEnvSpec")]
pub struct EnvSpec {
    pub id: EnvId,
    pub horizon: usize,
    pub state_dim: usize,
    pub action_space: ActionSpace,
}

impl EnvSpec {
    pub fn new(id: EnvId) -> Result<Self> {
        let (horizon, state_dim, action_space) = id.canonical()?;
        Ok(Self { id, horizon, state_dim, action_space })
    }

    pub fn synthetic(horizon: usize) -> Result<Self> {
        Self::new(EnvId::Synthetic { horizon })
    }

    pub fn cartpole(u_init: f64, u_dyn: f64) -> Result<Self> {
        Self::new(EnvId::Cartpole { noise: NoiseConfig::new(u_init, u_dyn) })
    }

    pub fn pointmaze(shape: RewardShape) -> Result<Self> {
        Self::new(EnvId::Pointmaze { reward: RewardFamily::new(shape) })
    }

    pub fn name(&self) -> String {
        self.id.name()
    }

    /// Checks that the stored properties agree with the canonical ones.
    pub fn validate(&self) -> Result<()> {
        let (horizon, state_dim, action_space) = self.id.canonical()?;
        if horizon != self.horizon {
            return Err(Error::SpecMismatch(format!("{}: horizon {} (expected {horizon})", self.name(), self.horizon)));
        }
        if state_dim != self.state_dim {
            return Err(Error::SpecMismatch(format!(
                "{}: state_dim {} (expected {state_dim})",
                self.name(),
                self.state_dim
            )));
        }
        if action_space != self.action_space {
            return Err(Error::SpecMismatch(format!(
                "{}: action space {:?} (expected {action_space:?})",
                self.name(),
                self.action_space
            )));
        }
        self.action_space.validate()
    }

    /// Analytic bounds on the episodic return, where known.
    pub fn return_bounds(&self) -> Option<(f64, f64)> {
        match &self.id {
            EnvId::Synthetic { .. } => Some((0.0, 1.0)),
            EnvId::Cartpole { .. } => Some((1.0, 200.0)),
            EnvId::MountainCar => Some((-200.0, 0.0)),
            EnvId::Acrobot => Some((-500.0, 0.0)),
            EnvId::Constant { reward, .. } => Some((*reward, *reward)),
            _ => None,
        }
    }
}

impl TryFrom<RawEnvSpec> for EnvSpec {
    type Error = Error;

    fn try_from(raw: RawEnvSpec) -> Result<Self> {
        let mut spec = EnvSpec::new(raw.id)?;
        if let Some(h) = raw.episode_length {
            spec.horizon = h;
        }
        if let Some(d) = raw.state_dim {
            spec.state_dim = d;
        }
        if let Some(a) = raw.action_space {
            spec.action_space = a;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl From<EnvSpec> for RawEnvSpec {
    fn from(spec: EnvSpec) -> Self {
        RawEnvSpec { id: spec.id, episode_length: None, state_dim: None, action_space: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// An episodic MDP instance.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode; all reset and transition randomness for the
    /// episode derives from `seed`.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &Action) -> Transition;
}

/// Step counter shared by the concrete environments: forces `done` once the
/// horizon is reached.
#[derive(Debug, Clone, Default)]
pub(crate) struct Clock {
    steps: usize,
}

impl Clock {
    pub(crate) fn reset(&mut self) {
        self.steps = 0;
    }

    pub(crate) fn tick(&mut self, horizon: usize, terminal: bool) -> bool {
        self.steps += 1;
        terminal || self.steps >= horizon
    }
}

#[derive(Debug)]
struct ConstantEnv {
    spec: EnvSpec,
    reward: f64,
    clock: Clock,
}

impl Environment for ConstantEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.clock.reset();
        vec![0.0]
    }

    fn step(&mut self, _action: &Action) -> Transition {
        let first = self.clock.steps == 0;
        let done = self.clock.tick(self.spec.horizon, false);
        Transition { next_state: vec![0.0], reward: if first { self.reward } else { 0.0 }, done }
    }
}

pub fn make_env(spec: &EnvSpec) -> Result<Box<dyn Environment>> {
    spec.validate()?;
    let spec = spec.clone();
    Ok(match spec.id.clone() {
        EnvId::Synthetic { horizon } => Box::new(SyntheticMdp::new(spec, horizon)),
        EnvId::Cartpole { noise } => Box::new(CartPole::new(spec, noise)),
        EnvId::Pendulum => Box::new(Pendulum::new(spec)),
        EnvId::MountainCar => Box::new(MountainCar::new(spec)),
        EnvId::MountainCarContinuous => Box::new(MountainCarContinuous::new(spec)),
        EnvId::Acrobot => Box::new(Acrobot::new(spec)),
        EnvId::Pointmaze { reward } => Box::new(PointMaze::new(spec, Maze::u_maze(), reward)),
        EnvId::Constant { reward, .. } => Box::new(ConstantEnv { spec, reward, clock: Clock::default() }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_shapes() {
        let s = EnvSpec::synthetic(3).unwrap();
        assert_eq!((s.state_dim, s.horizon), (3, 3));
        assert_eq!(s.action_space, ActionSpace::discrete(2));

        let c = EnvSpec::cartpole(0.05, 0.0).unwrap();
        assert_eq!((c.state_dim, c.horizon), (4, 200));
        assert_eq!(c.action_space, ActionSpace::discrete(2));

        let p = EnvSpec::pointmaze(RewardShape::L2 { alpha: 1.0 }).unwrap();
        assert_eq!((p.state_dim, p.horizon), (4, 150));
        assert_eq!(p.action_space.output_dim(), 2);

        let table = [
            (EnvId::Pendulum, 200, 3, 1),
            (EnvId::MountainCar, 200, 2, 3),
            (EnvId::MountainCarContinuous, 999, 2, 1),
            (EnvId::Acrobot, 500, 6, 3),
        ];
        for (id, h, d, a) in table {
            let s = EnvSpec::new(id).unwrap();
            assert_eq!((s.horizon, s.state_dim, s.action_space.output_dim()), (h, d, a));
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(EnvSpec::synthetic(4).is_err());
        assert!(EnvSpec::cartpole(-0.1, 0.0).is_err());
        let mut s = EnvSpec::new(EnvId::Acrobot).unwrap();
        s.action_space = ActionSpace::discrete(2);
        assert!(matches!(make_env(&s), Err(Error::SpecMismatch(_))));
        assert!(ActionSpace::discrete(1).validate().is_err());
        assert!(ActionSpace::Continuous { dim: 1, low: vec![1.0], high: vec![1.0] }.validate().is_err());
    }

    #[test]
    fn spec_serialization() {
        let s: EnvSpec = toml::from_str("kind = \"cartpole\"\nu_init = 0.1").unwrap();
        assert_eq!(s, EnvSpec::cartpole(0.1, 0.0).unwrap());

        let bad = toml::from_str::<EnvSpec>("kind = \"acrobot\"\nepisode_length = 200");
        assert!(bad.is_err());
        let unknown = toml::from_str::<EnvSpec>("kind = \"humanoid\"");
        assert!(unknown.is_err());

        let json = serde_json::to_string(&EnvSpec::synthetic(2).unwrap()).unwrap();
        let back: EnvSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, EnvSpec::synthetic(2).unwrap());
    }

    #[test]
    fn horizon_is_never_exceeded() {
        let specs = [
            EnvSpec::synthetic(3).unwrap(),
            EnvSpec::new(EnvId::MountainCar).unwrap(),
            EnvSpec::new(EnvId::Constant { reward: 2.0, horizon: 5 }).unwrap(),
        ];
        for spec in specs {
            let mut env = make_env(&spec).unwrap();
            env.reset(3);
            let mut n = 0;
            loop {
                n += 1;
                if env.step(&Action::Discrete(0)).done {
                    break;
                }
            }
            assert!(n <= spec.horizon);
        }
    }
}

//! Goal-distance reward families for the point maze.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RewardShape {
    L1 { alpha: f64 },
    L2 { alpha: f64 },
    Fraction { beta: f64, gamma: f64 },
    Sparse { epsilon: f64 },
}

impl RewardShape {
    pub fn label(&self) -> String {
        match self {
            RewardShape::L1 { alpha } => format!("l1_a{alpha}"),
            RewardShape::L2 { alpha } => format!("l2_a{alpha}"),
            RewardShape::Fraction { beta, gamma } => format!("fraction_b{beta}_g{gamma}"),
            RewardShape::Sparse { epsilon } => format!("sparse_e{epsilon}"),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            RewardShape::L1 { .. } => "l1",
            RewardShape::L2 { .. } => "l2",
            RewardShape::Fraction { .. } => "fraction",
            RewardShape::Sparse { .. } => "sparse",
        }
    }

    pub fn params(&self) -> String {
        match self {
            RewardShape::L1 { alpha } | RewardShape::L2 { alpha } => format!("alpha={alpha}"),
            RewardShape::Fraction { beta, gamma } => format!("beta={beta};gamma={gamma}"),
            RewardShape::Sparse { epsilon } => format!("epsilon={epsilon}"),
        }
    }

    /// The sixteen shaping variants (four per family) evaluated in the sweep.
    pub fn sweep_variants() -> Vec<RewardShape> {
        let mut out = Vec::with_capacity(16);
        for alpha in [1.0, 0.5, 2.0, 5.0] {
            out.push(RewardShape::L1 { alpha });
        }
        for alpha in [1.0, 0.5, 2.0, 5.0] {
            out.push(RewardShape::L2 { alpha });
        }
        for (beta, gamma) in [(0.01, 0.01), (0.1, 0.1), (0.01, 0.1), (0.05, 0.1)] {
            out.push(RewardShape::Fraction { beta, gamma });
        }
        for epsilon in [0.5, 0.1, 0.2, 1.0] {
            out.push(RewardShape::Sparse { epsilon });
        }
        out
    }
}

fn default_goal() -> Vec<f64> {
    super::Maze::u_maze().goal.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardFamily {
    #[serde(flatten)]
    pub shape: RewardShape,
    #[serde(default = "default_goal")]
    pub goal: Vec<f64>,
}

impl RewardFamily {
    pub fn new(shape: RewardShape) -> Self {
        Self { shape, goal: default_goal() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.shape {
            RewardShape::L1 { alpha } | RewardShape::L2 { alpha } => alpha > 0.0,
            RewardShape::Fraction { beta, gamma } => beta > 0.0 && gamma > 0.0,
            RewardShape::Sparse { epsilon } => epsilon > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("reward hyper-parameters must be positive: {:?}", self.shape)))
        }
    }
}

pub fn shaped_reward(shape: &RewardShape, s: &[f64], goal: &[f64]) -> Result<f64> {
    if s.len() != goal.len() {
        return Err(Error::DimensionMismatch { expected: goal.len(), got: s.len() });
    }
    let l1: f64 = s.iter().zip(goal).map(|(a, b)| (a - b).abs()).sum();
    let l2: f64 = s.iter().zip(goal).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(match *shape {
        RewardShape::L1 { alpha } => -alpha * l1,
        RewardShape::L2 { alpha } => -alpha * l2,
        RewardShape::Fraction { beta, gamma } => beta / (gamma + l2),
        RewardShape::Sparse { epsilon } => {
            if l2 >= epsilon {
                -1.0
            } else {
                0.0
            }
        }
    })
}

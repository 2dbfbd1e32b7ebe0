//! Difficulty metrics for episodic reinforcement-learning tasks, estimated
//! from the returns of randomly sampled policies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod environments;
pub mod error;
pub mod evolution;
pub mod infometrics;
pub mod plot;
pub mod policies;
pub mod rng;
pub mod rollout;
pub mod scoring;
pub mod stats;

pub use error::{Error, Result};

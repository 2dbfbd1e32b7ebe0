//! Five-state chain MDP with a horizon-dependent rewarded state.
//!
//! ```text
//!   s3 <-a2-- s1 --a1--> s2 --a2--> s4 --a1--> s5
//!  (absorb)          (a1 loop)  (a2 loop)   (absorb)
//! ```

use super::{Action, Clock, EnvSpec, Environment, Transition};

/// Feature vectors for s1..s5.
pub const SYNTHETIC_STATES: [[f64; 3]; 5] =
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]];

fn rewarded_state(horizon: usize) -> usize {
    match horizon {
        1 => 2,
        2 => 4,
        _ => 5,
    }
}

/// One deterministic transition. States are 1-based (`1..=5`), actions are
/// `1` (a1) or `2` (a2). Reward is paid on arrival at the rewarded state.
pub fn synthetic_step(state: usize, action: usize, horizon: usize) -> (usize, f64) {
    let next = match (state, action) {
        (1, 1) => 2,
        (1, _) => 3,
        (2, 1) => 2,
        (2, _) => 4,
        (4, 1) => 5,
        (4, _) => 4,
        (s, _) => s,
    };
    let target = rewarded_state(horizon);
    let reward = if next == target && state != target { 1.0 } else { 0.0 };
    (next, reward)
}

#[derive(Debug)]
pub struct SyntheticMdp {
    spec: EnvSpec,
    horizon: usize,
    state: usize,
    clock: Clock,
}

impl SyntheticMdp {
    pub fn new(spec: EnvSpec, horizon: usize) -> Self {
        Self { spec, horizon, state: 1, clock: Clock::default() }
    }

    fn observe(&self) -> Vec<f64> {
        SYNTHETIC_STATES[self.state - 1].to_vec()
    }
}

impl Environment for SyntheticMdp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.state = 1;
        self.clock.reset();
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Transition {
        let a = match action {
            Action::Discrete(0) => 1,
            _ => 2,
        };
        let (next, reward) = synthetic_step(self.state, a, self.horizon);
        self.state = next;
        let done = self.clock.tick(self.spec.horizon, false);
        Transition { next_state: self.observe(), reward, done }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_map() {
        assert_eq!(synthetic_step(1, 1, 1), (2, 1.0));
        for t in 1..=3 {
            assert_eq!(synthetic_step(1, 2, t), (3, 0.0));
            assert_eq!(synthetic_step(3, 1, t).0, 3);
            assert_eq!(synthetic_step(5, 2, t).0, 5);
        }
        assert_eq!(synthetic_step(2, 1, 2), (2, 0.0));
        assert_eq!(synthetic_step(2, 2, 2), (4, 1.0));
        assert_eq!(synthetic_step(4, 2, 3), (4, 0.0));
        assert_eq!(synthetic_step(4, 1, 3), (5, 1.0));
        // self-loop on the rewarded state is not an arrival
        assert_eq!(synthetic_step(2, 1, 1), (2, 0.0));
    }

    #[test]
    fn episode_returns_are_binary() {
        // exhaustive over all action sequences
        for t in 1..=3usize {
            for bits in 0..(1u32 << t) {
                let mut s = 1;
                let mut ret = 0.0;
                for k in 0..t {
                    let (n, r) = synthetic_step(s, 1 + ((bits >> k) & 1) as usize, t);
                    s = n;
                    ret += r;
                }
                assert!(ret == 0.0 || ret == 1.0);
                // only a1, a2, a1 (truncated to t) succeeds
                let success = [1usize, 2, 1][..t].iter().enumerate().all(|(k, &a)| 1 + ((bits >> k) & 1) as usize == a);
                assert_eq!(ret == 1.0, success);
            }
        }
    }
}

//! Point mass in a U-shaped maze.
//!
//! The maze is a grid of unit cells; cell `(row, col)` is centred at
//! `(x, y) = (col, row)`. The point is a damped double integrator driven by a
//! 2-D force in `[-1, 1]^2`. A move that would enter a wall cell is undone
//! along the offending axis and the velocity on that axis is zeroed.
//!
//! ```text
//!   #####
//!   #G..#
//!   ###.#
//!   #S..#
//!   #####
//! ```

use rand::{Rng, SeedableRng};

use super::{shaped_reward, Action, Clock, EnvSpec, Environment, RewardFamily, Transition};
use crate::rng::StreamRng;

const DT: f64 = 0.1;
const DAMPING: f64 = 1.0;
const ACCEL: f64 = 5.0;
const MAX_SPEED: f64 = 5.0;
const RESET_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Maze {
    walls: Vec<Vec<bool>>,
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

impl Maze {
    pub fn parse(layout: &str) -> Self {
        let mut walls = Vec::new();
        let (mut start, mut goal) = ([1.0, 1.0], [1.0, 1.0]);
        for (row, line) in layout.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate() {
            let mut cells = Vec::new();
            for (col, c) in line.chars().enumerate() {
                cells.push(c == '#');
                match c {
                    'S' => start = [col as f64, row as f64],
                    'G' => goal = [col as f64, row as f64],
                    _ => {}
                }
            }
            walls.push(cells);
        }
        Self { walls, start, goal }
    }

    pub fn u_maze() -> Self {
        Self::parse("#####\n#G..#\n###.#\n#S..#\n#####")
    }

    pub fn is_wall(&self, x: f64, y: f64) -> bool {
        let (col, row) = (x.round(), y.round());
        if row < 0.0 || col < 0.0 {
            return true;
        }
        self.walls.get(row as usize).and_then(|r| r.get(col as usize)).copied().unwrap_or(true)
    }
}

#[derive(Debug)]
pub struct PointMaze {
    spec: EnvSpec,
    maze: Maze,
    reward: RewardFamily,
    pos: [f64; 2],
    vel: [f64; 2],
    clock: Clock,
}

impl PointMaze {
    pub fn new(spec: EnvSpec, maze: Maze, reward: RewardFamily) -> Self {
        let pos = maze.start;
        Self { spec, maze, reward, pos, vel: [0.0; 2], clock: Clock::default() }
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Environment for PointMaze {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        for k in 0..2 {
            self.pos[k] = self.maze.start[k] + rng.random_range(-RESET_NOISE..=RESET_NOISE);
            self.vel[k] = rng.random_range(-RESET_NOISE..=RESET_NOISE);
        }
        self.clock.reset();
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Transition {
        let force = match action {
            Action::Continuous(v) => {
                [v.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0), v.get(1).copied().unwrap_or(0.0).clamp(-1.0, 1.0)]
            }
            Action::Discrete(_) => [0.0, 0.0],
        };
        for (v, f) in self.vel.iter_mut().zip(force) {
            *v = ((1.0 - DAMPING * DT) * *v + DT * ACCEL * f).clamp(-MAX_SPEED, MAX_SPEED);
        }
        let nx = self.pos[0] + DT * self.vel[0];
        if self.maze.is_wall(nx, self.pos[1]) {
            self.vel[0] = 0.0;
        } else {
            self.pos[0] = nx;
        }
        let ny = self.pos[1] + DT * self.vel[1];
        if self.maze.is_wall(self.pos[0], ny) {
            self.vel[1] = 0.0;
        } else {
            self.pos[1] = ny;
        }
        // goal dimension is validated at spec construction
        let reward = shaped_reward(&self.reward.shape, &self.pos, &self.reward.goal).unwrap_or(f64::NAN);
        let done = self.clock.tick(self.spec.horizon, false);
        Transition { next_state: self.observe(), reward, done }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{make_env, RewardShape};

    #[test]
    fn layout() {
        let m = Maze::u_maze();
        assert_eq!(m.start, [1.0, 3.0]);
        assert_eq!(m.goal, [1.0, 1.0]);
        assert!(m.is_wall(1.0, 2.0));
        assert!(!m.is_wall(3.0, 2.0));
        assert!(m.is_wall(-3.0, 1.0));
    }

    #[test]
    fn walls_block_motion() {
        let spec = EnvSpec::pointmaze(RewardShape::L2 { alpha: 1.0 }).unwrap();
        let mut env = make_env(&spec).unwrap();
        env.reset(0);
        // push straight up into the wall between start and goal rows
        let mut last = Vec::new();
        for _ in 0..150 {
            last = env.step(&Action::Continuous(vec![0.0, -1.0])).next_state;
        }
        assert!(last[1] > 2.4, "point should stay below the dividing wall: {last:?}");
    }

    #[test]
    fn waypoint_controller_reaches_goal() {
        let spec = EnvSpec::pointmaze(RewardShape::Sparse { epsilon: 0.3 }).unwrap();
        let mut env = make_env(&spec).unwrap();
        let mut s = env.reset(1);
        let waypoints = [[3.0, 3.0], [3.0, 1.0], [1.0, 1.0]];
        let mut w = 0;
        let mut best: f64 = -1.0;
        for _ in 0..150 {
            let target = waypoints[w];
            let dx = target[0] - s[0];
            let dy = target[1] - s[1];
            if dx.hypot(dy) < 0.2 && w < 2 {
                w += 1;
            }
            let a = vec![(2.0 * dx - s[2]).clamp(-1.0, 1.0), (2.0 * dy - s[3]).clamp(-1.0, 1.0)];
            let t = env.step(&Action::Continuous(a));
            best = best.max(t.reward);
            s = t.next_state;
        }
        assert_eq!(best, 0.0, "controller should enter the goal region, ended at {s:?}");
    }
}

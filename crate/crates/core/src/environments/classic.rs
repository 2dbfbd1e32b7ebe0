//! Classic-control dynamics with the standard benchmark constants.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};

use super::{Action, Clock, EnvSpec, Environment, NoiseConfig, Transition};
use crate::rng::StreamRng;

fn discrete(action: &Action) -> usize {
    match action {
        Action::Discrete(a) => *a,
        Action::Continuous(v) => usize::from(v.first().copied().unwrap_or(0.0) > 0.0),
    }
}

fn continuous(action: &Action) -> f64 {
    match action {
        Action::Continuous(v) => v.first().copied().unwrap_or(0.0),
        Action::Discrete(a) => *a as f64,
    }
}

fn uniform(rng: &mut StreamRng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        rng.random_range(-half_width..=half_width)
    }
}

// ---------------------------------------------------------------- CartPole

const CP_GRAVITY: f64 = 9.8;
const CP_MASS_CART: f64 = 1.0;
const CP_MASS_POLE: f64 = 0.1;
const CP_TOTAL_MASS: f64 = CP_MASS_CART + CP_MASS_POLE;
const CP_HALF_LENGTH: f64 = 0.5;
const CP_POLE_MASS_LENGTH: f64 = CP_MASS_POLE * CP_HALF_LENGTH;
const CP_FORCE: f64 = 10.0;
const CP_TAU: f64 = 0.02;
const CP_THETA_LIMIT: f64 = 12.0 * 2.0 * PI / 360.0;
const CP_X_LIMIT: f64 = 2.4;

/// Pole balancing on a cart, with optional reset and angular-velocity noise.
#[derive(Debug)]
pub struct CartPole {
    spec: EnvSpec,
    noise: NoiseConfig,
    state: [f64; 4],
    rng: StreamRng,
    clock: Clock,
}

impl CartPole {
    pub fn new(spec: EnvSpec, noise: NoiseConfig) -> Self {
        Self { spec, noise, state: [0.0; 4], rng: StreamRng::seed_from_u64(0), clock: Clock::default() }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = StreamRng::seed_from_u64(seed);
        for s in self.state.iter_mut() {
            *s = uniform(&mut self.rng, self.noise.u_init);
        }
        self.clock.reset();
        self.state.to_vec()
    }

    fn step(&mut self, action: &Action) -> Transition {
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if discrete(action) == 1 { CP_FORCE } else { -CP_FORCE };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + CP_POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / CP_TOTAL_MASS;
        let theta_acc =
            (CP_GRAVITY * sin - cos * temp) / (CP_HALF_LENGTH * (4.0 / 3.0 - CP_MASS_POLE * cos * cos / CP_TOTAL_MASS));
        let x_acc = temp - CP_POLE_MASS_LENGTH * theta_acc * cos / CP_TOTAL_MASS;

        let mut next =
            [x + CP_TAU * x_dot, x_dot + CP_TAU * x_acc, theta + CP_TAU * theta_dot, theta_dot + CP_TAU * theta_acc];
        if self.noise.u_dyn > 0.0 {
            next[3] += uniform(&mut self.rng, self.noise.u_dyn);
        }
        self.state = next;

        let fallen = next[0].abs() > CP_X_LIMIT || next[2].abs() > CP_THETA_LIMIT;
        let done = self.clock.tick(self.spec.horizon, fallen);
        Transition { next_state: next.to_vec(), reward: 1.0, done }
    }
}

// ---------------------------------------------------------------- Pendulum

const PD_MAX_SPEED: f64 = 8.0;
const PD_MAX_TORQUE: f64 = 2.0;
const PD_DT: f64 = 0.05;
const PD_G: f64 = 10.0;
const PD_M: f64 = 1.0;
const PD_L: f64 = 1.0;

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug)]
pub struct Pendulum {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    clock: Clock,
}

impl Pendulum {
    pub fn new(spec: EnvSpec) -> Self {
        Self { spec, theta: 0.0, theta_dot: 0.0, clock: Clock::default() }
    }

    /// Places the pendulum at an explicit angle and angular velocity.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    /// Per-step reward: negative quadratic cost in angle, velocity and torque.
    pub fn reward(theta: f64, theta_dot: f64, torque: f64) -> f64 {
        -(angle_normalize(theta).powi(2) + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque)
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        self.theta = uniform(&mut rng, PI);
        self.theta_dot = uniform(&mut rng, 1.0);
        self.clock.reset();
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Transition {
        let u = continuous(action).clamp(-PD_MAX_TORQUE, PD_MAX_TORQUE);
        let reward = Self::reward(self.theta, self.theta_dot, u);
        let new_dot = self.theta_dot
            + (-3.0 * PD_G / (2.0 * PD_L) * (self.theta + PI).sin() + 3.0 / (PD_M * PD_L * PD_L) * u) * PD_DT;
        self.theta += new_dot * PD_DT;
        self.theta_dot = new_dot.clamp(-PD_MAX_SPEED, PD_MAX_SPEED);
        let done = self.clock.tick(self.spec.horizon, false);
        Transition { next_state: self.observe(), reward, done }
    }
}

// ------------------------------------------------------------- MountainCar

const MC_MIN_POS: f64 = -1.2;
const MC_MAX_POS: f64 = 0.6;
const MC_MAX_SPEED: f64 = 0.07;
const MC_GOAL: f64 = 0.5;
const MC_FORCE: f64 = 0.001;
const MC_GRAVITY: f64 = 0.0025;
const MCC_GOAL: f64 = 0.45;
const MCC_POWER: f64 = 0.0015;

/// Shared hill-car integration. Returns the new (position, velocity).
fn hill_car(position: f64, velocity: f64, push: f64) -> (f64, f64) {
    let mut v = (velocity + push - MC_GRAVITY * (3.0 * position).cos()).clamp(-MC_MAX_SPEED, MC_MAX_SPEED);
    let p = (position + v).clamp(MC_MIN_POS, MC_MAX_POS);
    if p == MC_MIN_POS && v < 0.0 {
        v = 0.0;
    }
    (p, v)
}

fn hill_reset(seed: u64) -> (f64, f64) {
    let mut rng = StreamRng::seed_from_u64(seed);
    (rng.random_range(-0.6..=-0.4), 0.0)
}

/// Under-powered car in a valley, three discrete pushes, -1 per step.
#[derive(Debug)]
pub struct MountainCar {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    clock: Clock,
}

impl MountainCar {
    pub fn new(spec: EnvSpec) -> Self {
        Self { spec, position: -0.5, velocity: 0.0, clock: Clock::default() }
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (self.position, self.velocity) = hill_reset(seed);
        self.clock.reset();
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &Action) -> Transition {
        let a = discrete(action).min(2) as f64;
        (self.position, self.velocity) = hill_car(self.position, self.velocity, (a - 1.0) * MC_FORCE);
        let goal = self.position >= MC_GOAL && self.velocity >= 0.0;
        let done = self.clock.tick(self.spec.horizon, goal);
        Transition { next_state: vec![self.position, self.velocity], reward: -1.0, done }
    }
}

/// Continuous-force hill car: +100 on reaching the goal, quadratic action cost.
#[derive(Debug)]
pub struct MountainCarContinuous {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    clock: Clock,
}

impl MountainCarContinuous {
    pub fn new(spec: EnvSpec) -> Self {
        Self { spec, position: -0.5, velocity: 0.0, clock: Clock::default() }
    }
}

impl Environment for MountainCarContinuous {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        (self.position, self.velocity) = hill_reset(seed);
        self.clock.reset();
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &Action) -> Transition {
        let a = continuous(action);
        let force = a.clamp(-1.0, 1.0);
        (self.position, self.velocity) = hill_car(self.position, self.velocity, force * MCC_POWER);
        let goal = self.position >= MCC_GOAL && self.velocity >= 0.0;
        let reward = if goal { 100.0 } else { 0.0 } - 0.1 * a * a;
        let done = self.clock.tick(self.spec.horizon, goal);
        Transition { next_state: vec![self.position, self.velocity], reward, done }
    }
}

// ----------------------------------------------------------------- Acrobot

const AC_DT: f64 = 0.2;
const AC_L1: f64 = 1.0;
const AC_M1: f64 = 1.0;
const AC_M2: f64 = 1.0;
const AC_LC1: f64 = 0.5;
const AC_LC2: f64 = 0.5;
const AC_MOI: f64 = 1.0;
const AC_MAX_VEL1: f64 = 4.0 * PI;
const AC_MAX_VEL2: f64 = 9.0 * PI;
const AC_G: f64 = 9.8;

fn wrap(mut x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    while x > hi {
        x -= span;
    }
    while x < lo {
        x += span;
    }
    x
}

/// Two-link underactuated swing-up ("book" dynamics, RK4 at dt = 0.2).
#[derive(Debug)]
pub struct Acrobot {
    spec: EnvSpec,
    state: [f64; 4],
    clock: Clock,
}

impl Acrobot {
    pub fn new(spec: EnvSpec) -> Self {
        Self { spec, state: [0.0; 4], clock: Clock::default() }
    }

    fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
        let [t1, t2, dt1, dt2] = s;
        let d1 = AC_M1 * AC_LC1 * AC_LC1
            + AC_M2 * (AC_L1 * AC_L1 + AC_LC2 * AC_LC2 + 2.0 * AC_L1 * AC_LC2 * t2.cos())
            + 2.0 * AC_MOI;
        let d2 = AC_M2 * (AC_LC2 * AC_LC2 + AC_L1 * AC_LC2 * t2.cos()) + AC_MOI;
        let phi2 = AC_M2 * AC_LC2 * AC_G * (t1 + t2 - PI / 2.0).cos();
        let phi1 = -AC_M2 * AC_L1 * AC_LC2 * dt2 * dt2 * t2.sin() - 2.0 * AC_M2 * AC_L1 * AC_LC2 * dt2 * dt1 * t2.sin()
            + (AC_M1 * AC_LC1 + AC_M2 * AC_L1) * AC_G * (t1 - PI / 2.0).cos()
            + phi2;
        let ddt2 = (torque + d2 / d1 * phi1 - AC_M2 * AC_L1 * AC_LC2 * dt1 * dt1 * t2.sin() - phi2)
            / (AC_M2 * AC_LC2 * AC_LC2 + AC_MOI - d2 * d2 / d1);
        let ddt1 = -(d2 * ddt2 + phi1) / d1;
        [dt1, dt2, ddt1, ddt2]
    }

    fn rk4(s: [f64; 4], torque: f64) -> [f64; 4] {
        let add = |a: [f64; 4], k: [f64; 4], h: f64| -> [f64; 4] {
            [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]]
        };
        let k1 = Self::derivatives(s, torque);
        let k2 = Self::derivatives(add(s, k1, AC_DT / 2.0), torque);
        let k3 = Self::derivatives(add(s, k2, AC_DT / 2.0), torque);
        let k4 = Self::derivatives(add(s, k3, AC_DT), torque);
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = s[i] + AC_DT / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    fn observe(&self) -> Vec<f64> {
        let [t1, t2, dt1, dt2] = self.state;
        vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), dt1, dt2]
    }
}

impl Environment for Acrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        for s in self.state.iter_mut() {
            *s = uniform(&mut rng, 0.1);
        }
        self.clock.reset();
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Transition {
        let torque = discrete(action).min(2) as f64 - 1.0;
        let mut ns = Self::rk4(self.state, torque);
        ns[0] = wrap(ns[0], -PI, PI);
        ns[1] = wrap(ns[1], -PI, PI);
        ns[2] = ns[2].clamp(-AC_MAX_VEL1, AC_MAX_VEL1);
        ns[3] = ns[3].clamp(-AC_MAX_VEL2, AC_MAX_VEL2);
        self.state = ns;
        let terminal = -ns[0].cos() - (ns[1] + ns[0]).cos() > 1.0;
        let done = self.clock.tick(self.spec.horizon, terminal);
        Transition { next_state: self.observe(), reward: if terminal { 0.0 } else { -1.0 }, done }
    }
}

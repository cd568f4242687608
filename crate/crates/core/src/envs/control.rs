//! Classic-control tasks with uniformly binned observations.
//!
//! Dynamics follow the usual published constants:
//!
//! * CartPole: gravity 9.8, cart mass 1.0, pole mass 0.1, pole half-length
//!   0.5, force 10, Euler step 0.02 s; fails past 12° or |x| > 2.4; reward 1
//!   per step, episodes capped at 200 steps.
//! * MountainCar: force 0.001, gravity 0.0025, position in [-1.2, 0.6],
//!   speed capped at 0.07, goal at position 0.5; reward -1 per step,
//!   episodes capped at 200 steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

use super::spec::{EnvKind, EnvSpec};
use super::{Environment, Step};

pub const CARTPOLE_MAX_STEPS: usize = 200;
const MOUNTAINCAR_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlTask {
    CartPole,
    MountainCar,
}

impl ControlTask {
    pub fn name(self) -> &'static str {
        match self {
            ControlTask::CartPole => "cartpole",
            ControlTask::MountainCar => "mountaincar",
        }
    }
}

pub fn make_discretized_control(name: &str, bins: usize, seed: u64) -> Result<EnvSpec> {
    let task = match name {
        "cartpole" => ControlTask::CartPole,
        "mountaincar" => ControlTask::MountainCar,
        other => return Err(Error::UnknownEnv(other.to_string())),
    };
    if bins < 2 {
        return Err(invalid("bins", format!("need at least 2 bins per dimension, got {bins}")));
    }
    let horizon = match task {
        ControlTask::CartPole => CARTPOLE_MAX_STEPS,
        ControlTask::MountainCar => MOUNTAINCAR_MAX_STEPS,
    };
    Ok(EnvSpec { kind: EnvKind::Control { task, bins }, seed, horizon: Some(horizon) })
}

fn bin(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = ((x - lo) / (hi - lo) * bins as f64).floor();
    t.clamp(0.0, (bins - 1) as f64) as usize
}

#[derive(Debug, Clone)]
pub struct CartPole {
    /// `[x, x_dot, theta, theta_dot]`
    pub obs: [f64; 4],
    bins: usize,
    t: usize,
    max_steps: usize,
    rng: ChaCha8Rng,
}

impl CartPole {
    const GRAVITY: f64 = 9.8;
    const MASS_CART: f64 = 1.0;
    const MASS_POLE: f64 = 0.1;
    const HALF_LENGTH: f64 = 0.5;
    const FORCE: f64 = 10.0;
    const TAU: f64 = 0.02;
    const THETA_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
    const X_LIMIT: f64 = 2.4;

    pub fn new(bins: usize, max_steps: usize, seed: u64) -> Self {
        let mut env = Self { obs: [0.0; 4], bins, t: 0, max_steps, rng: ChaCha8Rng::seed_from_u64(seed) };
        env.reset();
        env
    }

    fn index(&self) -> usize {
        let b = self.bins;
        let dims = [
            bin(self.obs[0], -Self::X_LIMIT, Self::X_LIMIT, b),
            bin(self.obs[1], -3.0, 3.0, b),
            bin(self.obs[2], -Self::THETA_LIMIT, Self::THETA_LIMIT, b),
            bin(self.obs[3], -3.5, 3.5, b),
        ];
        dims.iter().fold(0, |acc, d| acc * b + d)
    }
}

impl Environment for CartPole {
    fn n_states(&self) -> usize {
        self.bins.pow(4)
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn reset(&mut self) -> usize {
        for x in self.obs.iter_mut() {
            *x = self.rng.random_range(-0.05..0.05);
        }
        self.t = 0;
        self.index()
    }

    fn step(&mut self, action: usize) -> Step {
        let [x, x_dot, theta, theta_dot] = self.obs;
        let force = if action == 1 { Self::FORCE } else { -Self::FORCE };
        let total_mass = Self::MASS_CART + Self::MASS_POLE;
        let pole_ml = Self::MASS_POLE * Self::HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_ml * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (Self::GRAVITY * sin - cos * temp)
            / (Self::HALF_LENGTH * (4.0 / 3.0 - Self::MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - pole_ml * theta_acc * cos / total_mass;
        self.obs = [
            x + Self::TAU * x_dot,
            x_dot + Self::TAU * x_acc,
            theta + Self::TAU * theta_dot,
            theta_dot + Self::TAU * theta_acc,
        ];
        self.t += 1;
        let terminal = self.obs[0].abs() > Self::X_LIMIT || self.obs[2].abs() > Self::THETA_LIMIT;
        let truncated = !terminal && self.t >= self.max_steps;
        Step { next_state: self.index(), reward: 1.0, terminal, truncated }
    }

    fn state(&self) -> usize {
        self.index()
    }
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    /// `[position, velocity]`
    pub obs: [f64; 2],
    bins: usize,
    t: usize,
    max_steps: usize,
    rng: ChaCha8Rng,
}

impl MountainCar {
    const MIN_POS: f64 = -1.2;
    const MAX_POS: f64 = 0.6;
    const MAX_SPEED: f64 = 0.07;
    const GOAL: f64 = 0.5;
    const FORCE: f64 = 0.001;
    const GRAVITY: f64 = 0.0025;

    pub fn new(bins: usize, max_steps: usize, seed: u64) -> Self {
        let mut env = Self { obs: [0.0; 2], bins, t: 0, max_steps, rng: ChaCha8Rng::seed_from_u64(seed) };
        env.reset();
        env
    }

    fn index(&self) -> usize {
        let b = self.bins;
        bin(self.obs[0], Self::MIN_POS, Self::MAX_POS, b) * b
            + bin(self.obs[1], -Self::MAX_SPEED, Self::MAX_SPEED, b)
    }
}

impl Environment for MountainCar {
    fn n_states(&self) -> usize {
        self.bins * self.bins
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn reset(&mut self) -> usize {
        self.obs = [self.rng.random_range(-0.6..-0.4), 0.0];
        self.t = 0;
        self.index()
    }

    fn step(&mut self, action: usize) -> Step {
        let [mut pos, mut vel] = self.obs;
        vel += (action as f64 - 1.0) * Self::FORCE - (3.0 * pos).cos() * Self::GRAVITY;
        vel = vel.clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        pos = (pos + vel).clamp(Self::MIN_POS, Self::MAX_POS);
        if pos == Self::MIN_POS && vel < 0.0 {
            vel = 0.0;
        }
        self.obs = [pos, vel];
        self.t += 1;
        let terminal = pos >= Self::GOAL;
        let truncated = !terminal && self.t >= self.max_steps;
        Step { next_state: self.index(), reward: -1.0, terminal, truncated }
    }

    fn state(&self) -> usize {
        self.index()
    }
}

//! Desk-scale environments.
//!
//! Every environment exposes the [`Environment`] step interface used by the
//! model-free learners. Tabular environments additionally derive an exact
//! [`TabularMdp`] for the dynamic-programming solvers.
//!
//! Reward timing: `r(s, a)` is paid when leaving `s`, already averaged over
//! the successor distribution.

mod chain;
mod control;
mod garnet;
mod grid;
mod spec;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::TabularMdp;

pub use chain::{chain_mdp, make_chain, BACK, FORWARD};
pub use control::{make_discretized_control, CartPole, ControlTask, MountainCar, CARTPOLE_MAX_STEPS};
pub use garnet::{garnet_mdp, make_garnet};
pub use grid::{grid_mdp, make_gridworld, DOWN, LEFT, RIGHT, UP};
pub use spec::{EnvKind, EnvSpec};

/// Action indices of [`two_state`].
pub const STAY: usize = 0;
pub const GO: usize = 1;

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next_state: usize,
    pub reward: f64,
    /// `next_state` is absorbing; no bootstrapping past it.
    pub terminal: bool,
    /// The episode was cut by a time limit; `next_state` is not absorbing.
    pub truncated: bool,
}

/// Single-owner mutable stepper over a discrete state index.
pub trait Environment: Send {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Starts a new episode and returns its first state.
    fn reset(&mut self) -> usize;
    fn step(&mut self, action: usize) -> Step;
    fn state(&self) -> usize;
}

/// Two states, two actions: `STAY` self-loops, `GO` switches; `r(s, ·) = 1`
/// iff `s = 1`. Starts in state 0.
pub fn two_state(gamma: f64) -> TabularMdp {
    #[rustfmt::skip]
    let p = vec![
        1.0, 0.0,   0.0, 1.0, // s = 0: stay, go
        0.0, 1.0,   1.0, 0.0, // s = 1: stay, go
    ];
    let r = vec![0.0, 0.0, 1.0, 1.0];
    TabularMdp::new(2, 2, p, r, gamma, vec![1.0, 0.0], vec![false; 2]).expect("two-state MDP is well formed")
}

/// Samples transitions from an exact model.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: Arc<TabularMdp>,
    rng: ChaCha8Rng,
    state: usize,
    t: usize,
    horizon: Option<usize>,
}

impl TabularEnv {
    pub fn new(mdp: Arc<TabularMdp>, horizon: Option<usize>, rng: ChaCha8Rng) -> Self {
        let mut env = Self { mdp, rng, state: 0, t: 0, horizon };
        env.reset();
        env
    }

    pub fn seeded(mdp: Arc<TabularMdp>, horizon: Option<usize>, seed: u64) -> Self {
        Self::new(mdp, horizon, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn model(&self) -> &TabularMdp {
        &self.mdp
    }

    /// Teleports to `s` without touching the episode clock.
    pub fn set_state(&mut self, s: usize) {
        assert!(s < self.mdp.n_states());
        self.state = s;
    }

    fn sample(rng: &mut ChaCha8Rng, entries: impl Iterator<Item = (usize, f64)>) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in entries {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

impl Environment for TabularEnv {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn reset(&mut self) -> usize {
        let mu = self.mdp.initial_dist();
        self.state = Self::sample(&mut self.rng, mu.iter().copied().enumerate().filter(|(_, p)| *p > 0.0));
        self.t = 0;
        self.state
    }

    fn step(&mut self, action: usize) -> Step {
        let s = self.state;
        let reward = self.mdp.reward(s, action);
        let next = Self::sample(&mut self.rng, self.mdp.successors(s, action).iter().copied());
        self.state = next;
        self.t += 1;
        let terminal = self.mdp.is_terminal(next);
        let truncated = !terminal && self.horizon.is_some_and(|h| self.t >= h);
        Step { next_state: next, reward, terminal, truncated }
    }

    fn state(&self) -> usize {
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_env_follows_the_model() {
        let mdp = Arc::new(two_state(0.9));
        let mut env = TabularEnv::seeded(mdp, Some(3), 1);
        assert_eq!(env.reset(), 0);
        let s = env.step(GO);
        assert_eq!((s.next_state, s.reward, s.terminal, s.truncated), (1, 0.0, false, false));
        let s = env.step(STAY);
        assert_eq!((s.next_state, s.reward), (1, 1.0));
        let s = env.step(STAY);
        assert!(s.truncated);
    }
}

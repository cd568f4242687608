//! Stationary Markov policies over a finite action set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// `action_of[s]`.
    Deterministic(Vec<usize>),
    /// Row-major `π[s][a]`.
    Stochastic { n_actions: usize, probs: Vec<f64> },
}

impl Policy {
    /// Action 0 everywhere.
    pub fn first_action(n_states: usize) -> Self {
        Policy::Deterministic(vec![0; n_states])
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy::Stochastic { n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn n_states(&self) -> usize {
        match self {
            Policy::Deterministic(a) => a.len(),
            Policy::Stochastic { n_actions, probs } => probs.len() / n_actions,
        }
    }

    /// The deterministic action at `s`; `None` for stochastic policies.
    pub fn action(&self, s: usize) -> Option<usize> {
        match self {
            Policy::Deterministic(a) => Some(a[s]),
            Policy::Stochastic { .. } => None,
        }
    }

    /// Probability of `a` at `s`.
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic(acts) => {
                if acts[s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic { n_actions, probs } => probs[s * n_actions + a],
        }
    }

    /// `(action, probability)` pairs with non-zero mass at `s`.
    pub fn support(&self, s: usize, n_actions: usize) -> Vec<(usize, f64)> {
        match self {
            Policy::Deterministic(acts) => vec![(acts[s], 1.0)],
            Policy::Stochastic { probs, .. } => probs[s * n_actions..(s + 1) * n_actions]
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0.0)
                .map(|(a, &p)| (a, p))
                .collect(),
        }
    }

    /// Checks shape, action range and row normalisation against an MDP's sizes.
    pub fn check(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states {
            return Err(Error::ShapeMismatch { expected: n_states, got: self.n_states() });
        }
        match self {
            Policy::Deterministic(acts) => {
                if let Some((s, &a)) = acts.iter().enumerate().find(|(_, &a)| a >= n_actions) {
                    return Err(Error::InvalidParameter {
                        name: "policy",
                        reason: format!("action {a} at state {s} out of range"),
                    });
                }
            }
            Policy::Stochastic { n_actions: na, probs } => {
                if *na != n_actions {
                    return Err(Error::ShapeMismatch { expected: n_actions, got: *na });
                }
                for (s, row) in probs.chunks(n_actions).enumerate() {
                    let sum: f64 = row.iter().sum();
                    if row.iter().any(|&p| p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidParameter {
                            name: "policy",
                            reason: format!("row {s} is not a distribution (sum {sum})"),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

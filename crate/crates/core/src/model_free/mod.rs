//! Tabular model-free versions of κ-PI and κ-VI.
//!
//! * [`q`]: Q-learning learners. The surrogate problem is solved by a
//!   Q-table with a periodically refreshed snapshot as bootstrap target;
//!   the κ-PI variant also evaluates the current policy with off-policy
//!   TD(0) on replayed data.
//! * [`pg`]: softmax policy-gradient learners trained on κ-shaped returns,
//!   plus the GAE mode.
//!
//! Learners are driven by a [`KappaSchedule`]: `n_iterations` outer
//! iterations, each with its own sample budget. For Q-learning a sample is
//! an environment step; for policy gradient it is one rollout.

pub mod pg;
pub mod q;

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{invalid, Result};
use crate::eval::{expected_return, policy_evaluation_exact};
use crate::kappa::KappaParams;
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::schedule::KappaSchedule;
use crate::value::ValueTable;

pub use pg::{
    advantage_identity_check, gae_advantages, gae_mode, kappa_returns, kappa_returns_with_tail, kpi_pg, kvi_pg,
    pg_update, policy_gradient, rollout, surrogate_objective, Baseline, PgAgent, PgHyper, PgLearnerState, PgMode,
    PgVariant, Tail,
};
pub use q::{
    kpi_q, kvi_q, q_evaluation_step, q_improvement_step, shaped_sample_reward, QAgent, QHyper, QLearnerState,
    QVariant, ShapingValue,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    /// `s_next` is absorbing.
    pub terminal: bool,
    /// The episode was cut by a time limit after this step.
    pub truncated: bool,
}

impl Transition {
    pub fn ends_episode(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub type Trajectory = Vec<Transition>;

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// `n` items drawn uniformly with replacement; empty if the buffer is.
    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| *self.items.choose(rng).expect("non-empty")).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

/// Training discount, κ and budget shared by every learner.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSetup {
    pub gamma: f64,
    pub params: KappaParams,
    pub schedule: KappaSchedule,
    /// Roughly this many evenly spaced iterations are logged, plus the last.
    pub log_points: usize,
}

impl RunSetup {
    pub fn new(gamma: f64, params: KappaParams, schedule: KappaSchedule) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid("gamma", format!("{gamma} not in (0, 1)")));
        }
        Ok(Self { gamma, params, schedule, log_points: 50 })
    }

    /// Whether 1-based iteration `i` gets a log row.
    pub fn logs(&self, i: u64) -> bool {
        let n = self.schedule.n_iterations;
        let k = self.log_points as u64;
        i == n || (i * k / n) > ((i - 1) * k / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    /// 1-based outer iteration.
    pub iteration: u64,
    pub env_steps: u64,
    /// Mean undiscounted return of the episodes finished since the last row.
    pub mean_return: Option<f64>,
    /// Score of the current policy (see [`Evaluator`]).
    pub greedy_return: f64,
    /// `‖V* − V^π‖_∞` when a model is available.
    pub sup_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    pub final_policy: Policy,
}

impl TrainingLog {
    pub fn final_return(&self) -> Option<f64> {
        self.rows.last().map(|r| r.greedy_return)
    }
}

/// Scores policies for the training log.
#[allow(clippy::large_enum_variant)]
pub enum Evaluator {
    /// `η(π) = Σ μ V^π` on a model carrying the evaluation discount.
    Exact { model: Arc<TabularMdp>, v_star: Option<ValueTable> },
    /// Mean undiscounted return over fresh episodes.
    MonteCarlo { env: Box<dyn Environment>, episodes: usize, rng: ChaCha8Rng, max_steps: usize },
}

impl Evaluator {
    pub fn exact(model: Arc<TabularMdp>, with_optimum: bool) -> Result<Self> {
        let v_star = if with_optimum {
            Some(crate::dp::value_iteration(&model, 1e-10)?.final_value)
        } else {
            None
        };
        Ok(Evaluator::Exact { model, v_star })
    }

    pub fn evaluate(&mut self, policy: &Policy) -> Result<(f64, Option<f64>)> {
        match self {
            Evaluator::Exact { model, v_star } => {
                let v = policy_evaluation_exact(model, policy, 1e-10)?;
                Ok((expected_return(model, &v), v_star.as_ref().map(|vs| vs.sup_dist(&v))))
            }
            Evaluator::MonteCarlo { env, episodes, rng, max_steps } => {
                let na = env.n_actions();
                let mut total = 0.0;
                for _ in 0..*episodes {
                    let mut s = env.reset();
                    for _ in 0..*max_steps {
                        let a = match policy.action(s) {
                            Some(a) => a,
                            None => sample_index(rng, (0..na).map(|a| policy.prob(s, a))),
                        };
                        let step = env.step(a);
                        total += step.reward;
                        if step.terminal || step.truncated {
                            break;
                        }
                        s = step.next_state;
                    }
                }
                Ok((total / (*episodes).max(1) as f64, None))
            }
        }
    }
}

/// Inverse-CDF draw from non-negative weights summing to one.
pub(crate) fn sample_index(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

/// Undiscounted returns of finished episodes.
#[derive(Debug, Clone, Default)]
pub struct EpisodeTracker {
    running: f64,
    finished: Vec<f64>,
}

impl EpisodeTracker {
    pub fn observe(&mut self, t: &Transition) {
        self.running += t.r;
        if t.ends_episode() {
            self.finished.push(self.running);
            self.running = 0.0;
        }
    }

    /// Mean over episodes finished since the last call.
    pub fn drain_mean(&mut self) -> Option<f64> {
        if self.finished.is_empty() {
            return None;
        }
        let mean = self.finished.iter().sum::<f64>() / self.finished.len() as f64;
        self.finished.clear();
        Some(mean)
    }
}

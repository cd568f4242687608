//! Q-learning learners for κ-PI and κ-VI.
//!
//! Tables: `q_theta` solves the surrogate problem, `q_theta_snapshot` is its
//! bootstrap target, `q_phi` (with `q_phi_snapshot`) estimates the value of
//! the current policy in the original problem and supplies the shaping
//! values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::Result;
use crate::kappa::KappaParams;
use crate::policy::Policy;
use crate::rng::RunRngs;
use crate::value::QTable;

use super::{EpisodeTracker, EpsilonSchedule, Evaluator, LogRow, ReplayBuffer, RunSetup, TrainingLog, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QHyper {
    pub alpha: f64,
    pub batch_size: usize,
    /// Snapshots refresh after this many batch updates.
    pub snapshot_period: usize,
    pub buffer_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the total budget over which ε decays.
    pub eps_decay_fraction: f64,
    /// Shape with the policy evaluated in the previous iteration instead of
    /// the greedy policy of the surrogate snapshot.
    pub previous_policy_target: bool,
}

impl Default for QHyper {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            batch_size: 4,
            snapshot_period: 100,
            buffer_capacity: 100_000,
            eps_start: 1.0,
            eps_end: 0.1,
            eps_decay_fraction: 0.1,
            previous_policy_target: false,
        }
    }
}

/// Where the shaping value `V_φ(s')` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapingValue {
    /// `q_phi[s'][π(s')]` with `π` greedy for `q_theta_snapshot` (or the
    /// stored previous policy when enabled).
    PolicyValue,
    /// `max_a q_phi[s'][a]`.
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearnerState {
    pub q_theta: QTable,
    pub q_theta_snapshot: QTable,
    pub q_phi: QTable,
    pub q_phi_snapshot: QTable,
    pub alpha: f64,
    pub snapshot_period: usize,
    /// Policy evaluated in the previous iteration, if tracked.
    pub previous_policy: Option<Vec<usize>>,
    theta_updates: usize,
    phi_updates: usize,
}

impl QLearnerState {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, snapshot_period: usize) -> Self {
        let zeros = QTable::zeros(n_states, n_actions);
        Self {
            q_theta: zeros.clone(),
            q_theta_snapshot: zeros.clone(),
            q_phi: zeros.clone(),
            q_phi_snapshot: zeros,
            alpha,
            snapshot_period: snapshot_period.max(1),
            previous_policy: None,
            theta_updates: 0,
            phi_updates: 0,
        }
    }

    pub fn theta_updates(&self) -> usize {
        self.theta_updates
    }

    pub fn phi_updates(&self) -> usize {
        self.phi_updates
    }

    fn shaping_value(&self, s: usize, shaping: ShapingValue) -> f64 {
        match shaping {
            ShapingValue::Max => self.q_phi.max(s),
            ShapingValue::PolicyValue => {
                let a = match &self.previous_policy {
                    Some(pi) => pi[s],
                    None => self.q_theta_snapshot.argmax(s),
                };
                self.q_phi.get(s, a)
            }
        }
    }

    /// One batch of surrogate Q-learning updates.
    pub fn improve(&mut self, batch: &[Transition], gamma: f64, params: KappaParams, shaping: ShapingValue) {
        for t in batch {
            let bootstrap = if t.terminal { 0.0 } else { self.q_theta_snapshot.max(t.s_next) };
            let shaped = shaped_sample_reward(t, |s| self.shaping_value(s, shaping), gamma, params.kappa_s);
            let target = shaped + gamma * params.kappa_d * bootstrap;
            let q = self.q_theta.get_mut(t.s, t.a);
            *q += self.alpha * (target - *q);
        }
        self.theta_updates += 1;
        if self.theta_updates.is_multiple_of(self.snapshot_period) {
            self.q_theta_snapshot = self.q_theta.clone();
        }
    }

    /// One batch of off-policy TD(0) updates toward `Q^π`.
    pub fn evaluate(&mut self, batch: &[Transition], gamma: f64, policy: &[usize]) {
        for t in batch {
            let next = if t.terminal { 0.0 } else { self.q_phi_snapshot.get(t.s_next, policy[t.s_next]) };
            let q = self.q_phi.get_mut(t.s, t.a);
            *q += self.alpha * (t.r + gamma * next - *q);
        }
        self.phi_updates += 1;
        if self.phi_updates.is_multiple_of(self.snapshot_period) {
            self.q_phi_snapshot = self.q_phi.clone();
        }
    }

    /// Greedy policy of the surrogate snapshot.
    pub fn snapshot_policy(&self) -> Vec<usize> {
        (0..self.q_theta_snapshot.n_states()).map(|s| self.q_theta_snapshot.argmax(s)).collect()
    }
}

/// `r + γ(1 − κ_s)·V_φ(s')`, without bootstrap at terminals.
pub fn shaped_sample_reward(t: &Transition, v_phi_of: impl Fn(usize) -> f64, gamma: f64, kappa_s: f64) -> f64 {
    if t.terminal {
        return t.r;
    }
    t.r + gamma * (1.0 - kappa_s) * v_phi_of(t.s_next)
}

pub fn q_improvement_step(state: &mut QLearnerState, batch: &[Transition], gamma: f64, params: KappaParams) {
    state.improve(batch, gamma, params, ShapingValue::PolicyValue);
}

/// Panics if `policy` is stochastic.
pub fn q_evaluation_step(state: &mut QLearnerState, batch: &[Transition], gamma: f64, policy: &Policy) {
    let Policy::Deterministic(acts) = policy else {
        panic!("TD(0) evaluation needs a deterministic policy");
    };
    state.evaluate(batch, gamma, acts);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QVariant {
    /// Separate evaluation phase on replayed data.
    PolicyIteration,
    /// `φ ← θ` at the end of each iteration.
    ValueIteration,
}

/// A Q-learning run in progress.
pub struct QAgent<'a> {
    pub state: QLearnerState,
    pub buffer: ReplayBuffer,
    pub setup: RunSetup,
    pub hyper: QHyper,
    pub variant: QVariant,
    pub env_steps: u64,
    env: &'a mut dyn Environment,
    rngs: &'a mut RunRngs,
    epsilon: EpsilonSchedule,
    tracker: EpisodeTracker,
    s: usize,
}

impl<'a> QAgent<'a> {
    pub fn new(
        env: &'a mut dyn Environment,
        setup: RunSetup,
        hyper: QHyper,
        variant: QVariant,
        rngs: &'a mut RunRngs,
    ) -> Self {
        let state = QLearnerState::new(env.n_states(), env.n_actions(), hyper.alpha, hyper.snapshot_period);
        let total = setup.schedule.total_samples;
        let epsilon = EpsilonSchedule {
            start: hyper.eps_start,
            end: hyper.eps_end,
            decay_steps: (hyper.eps_decay_fraction * total as f64).round() as u64,
        };
        let s = env.reset();
        Self {
            state,
            buffer: ReplayBuffer::new(hyper.buffer_capacity),
            setup,
            hyper,
            variant,
            env_steps: 0,
            env,
            rngs,
            epsilon,
            tracker: EpisodeTracker::default(),
            s,
        }
    }

    fn act(&mut self) -> usize {
        let na = self.state.q_theta.n_actions();
        if self.rngs.explore.random::<f64>() < self.epsilon.value(self.env_steps) {
            self.rngs.explore.random_range(0..na)
        } else {
            self.state.q_theta.argmax(self.s)
        }
    }

    /// Runs outer iteration `i` (0-based).
    pub fn run_iteration(&mut self, i: u64) {
        let budget = self.setup.schedule.samples_in(i);
        let (gamma, params) = (self.setup.gamma, self.setup.params);
        let shaping = match self.variant {
            QVariant::PolicyIteration => ShapingValue::PolicyValue,
            QVariant::ValueIteration => ShapingValue::Max,
        };
        for _ in 0..budget {
            let a = self.act();
            let step = self.env.step(a);
            self.env_steps += 1;
            let t = Transition {
                s: self.s,
                a,
                r: step.reward,
                s_next: step.next_state,
                terminal: step.terminal,
                truncated: step.truncated,
            };
            self.buffer.push(t);
            self.tracker.observe(&t);
            self.s = if t.ends_episode() { self.env.reset() } else { t.s_next };
            let batch = self.buffer.sample(&mut self.rngs.buffer, self.hyper.batch_size);
            self.state.improve(&batch, gamma, params, shaping);
        }
        match self.variant {
            QVariant::PolicyIteration => {
                let pi = self.state.snapshot_policy();
                for _ in 0..budget {
                    let batch = self.buffer.sample(&mut self.rngs.buffer, self.hyper.batch_size);
                    self.state.evaluate(&batch, gamma, &pi);
                }
                if self.hyper.previous_policy_target {
                    self.state.previous_policy = Some(pi);
                }
            }
            QVariant::ValueIteration => {
                self.state.q_phi = self.state.q_theta.clone();
                self.state.q_phi_snapshot = self.state.q_theta.clone();
            }
        }
    }

    /// Greedy policy of the surrogate learner.
    pub fn policy(&self) -> Policy {
        crate::eval::greedy_policy(&self.state.q_theta)
    }

    pub fn run(mut self, evaluator: &mut Evaluator) -> Result<TrainingLog> {
        let mut rows = Vec::new();
        for i in 0..self.setup.schedule.n_iterations {
            self.run_iteration(i);
            if self.setup.logs(i + 1) {
                let (greedy_return, sup_error) = evaluator.evaluate(&self.policy())?;
                rows.push(LogRow {
                    iteration: i + 1,
                    env_steps: self.env_steps,
                    mean_return: self.tracker.drain_mean(),
                    greedy_return,
                    sup_error,
                });
            }
        }
        Ok(TrainingLog { rows, final_policy: self.policy() })
    }
}

pub fn kpi_q(
    env: &mut dyn Environment,
    setup: RunSetup,
    hyper: QHyper,
    rngs: &mut RunRngs,
    evaluator: &mut Evaluator,
) -> Result<TrainingLog> {
    QAgent::new(env, setup, hyper, QVariant::PolicyIteration, rngs).run(evaluator)
}

pub fn kvi_q(
    env: &mut dyn Environment,
    setup: RunSetup,
    hyper: QHyper,
    rngs: &mut RunRngs,
    evaluator: &mut Evaluator,
) -> Result<TrainingLog> {
    QAgent::new(env, setup, hyper, QVariant::ValueIteration, rngs).run(evaluator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{two_state, GO, STAY};
    use crate::eval::policy_evaluation_exact;
    use crate::kappa::{build_surrogate, SurrogateMdp};
    use crate::mdp::TabularMdp;
    use crate::value::ValueTable;

    fn k(x: f64) -> KappaParams {
        KappaParams::standard(x).unwrap()
    }

    /// One transition per `(s, a)` of a deterministic model.
    fn sweep(mdp: &TabularMdp) -> Vec<Transition> {
        let mut out = Vec::new();
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let &(next, p) = mdp.successors(s, a).first().unwrap();
                assert_eq!(p, 1.0);
                out.push(Transition {
                    s,
                    a,
                    r: mdp.reward(s, a),
                    s_next: next,
                    terminal: mdp.is_terminal(next),
                    truncated: false,
                });
            }
        }
        out
    }

    #[test]
    fn shaped_sample_examples() {
        let t = Transition { s: 0, a: 1, r: 0.0, s_next: 1, terminal: false, truncated: false };
        assert!((shaped_sample_reward(&t, |_| 10.0, 0.9, 0.5) - 4.5).abs() < 1e-12);
        assert_eq!(shaped_sample_reward(&Transition { terminal: true, r: 2.0, ..t }, |_| 10.0, 0.9, 0.5), 2.0);
        assert_eq!(shaped_sample_reward(&Transition { r: 2.0, ..t }, |_| 10.0, 0.9, 1.0), 2.0);
    }

    #[test]
    fn first_update_with_unit_step_copies_reward() {
        let mut st = QLearnerState::new(2, 2, 1.0, 100);
        let t = Transition { s: 1, a: 0, r: 3.0, s_next: 0, terminal: false, truncated: false };
        q_improvement_step(&mut st, &[t], 0.9, k(0.5));
        assert_eq!(st.q_theta.get(1, 0), 3.0);
    }

    #[test]
    fn kappa_one_is_plain_q_learning() {
        let mdp = two_state(0.9);
        let batch = sweep(&mdp);
        let mut shaped = QLearnerState::new(2, 2, 0.3, 2);
        shaped.q_phi = QTable::from_vec(2, 2, vec![5.0, -1.0, 2.0, 7.0]);
        let mut plain = shaped.q_theta.clone();
        let mut plain_snap = plain.clone();
        for step in 1..=20 {
            q_improvement_step(&mut shaped, &batch, 0.9, k(1.0));
            for t in &batch {
                let target = t.r + 0.9 * plain_snap.max(t.s_next);
                let q = plain.get_mut(t.s, t.a);
                *q += 0.3 * (target - *q);
            }
            if step % 2 == 0 {
                plain_snap = plain.clone();
            }
        }
        assert_eq!(shaped.q_theta, plain);
    }

    #[test]
    fn frozen_shaping_converges_to_surrogate_optimum() {
        let mdp = two_state(0.9);
        let v_star = ValueTable(vec![9.0, 10.0]);
        let SurrogateMdp::Discounted(sur) = build_surrogate(&mdp, &v_star, k(0.5)).unwrap() else { panic!() };
        let q_exact = crate::kappa::kappa_q(&mdp, &v_star, k(0.5), 1e-12).unwrap();
        let mut st = QLearnerState::new(2, 2, 0.5, 1);
        // q_phi(s, a) = V*(s) for every a, so the shaping value is V* whatever the policy
        st.q_phi = QTable::broadcast(&v_star, 2);
        let batch = sweep(&mdp);
        for _ in 0..2000 {
            q_improvement_step(&mut st, &batch, 0.9, k(0.5));
        }
        assert!(st.q_theta.sup_dist(&q_exact) < 1e-3, "{:?} vs {:?}", st.q_theta, q_exact);
        assert_eq!(sur.discount(), 0.45);
    }

    #[test]
    fn td_evaluation_matches_exact_values() {
        let mdp = two_state(0.9);
        let pi = Policy::Deterministic(vec![GO, STAY]);
        let v = policy_evaluation_exact(&mdp, &pi, 1e-12).unwrap();
        let mut st = QLearnerState::new(2, 2, 0.5, 1);
        let batch = sweep(&mdp);
        for _ in 0..2000 {
            q_evaluation_step(&mut st, &batch, 0.9, &pi);
        }
        assert!((st.q_phi.get(0, GO) - v[0]).abs() < 1e-3);
        assert!((st.q_phi.get(1, STAY) - v[1]).abs() < 1e-3);
        assert!((v[0] - 9.0).abs() < 1e-9 && (v[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn terminal_batch_learns_reward() {
        let mut st = QLearnerState::new(2, 1, 0.5, 1);
        let t = Transition { s: 0, a: 0, r: 2.5, s_next: 1, terminal: true, truncated: false };
        st.q_phi_snapshot = QTable::from_vec(2, 1, vec![100.0, 100.0]);
        for _ in 0..100 {
            q_evaluation_step(&mut st, &[t], 0.9, &Policy::Deterministic(vec![0, 0]));
        }
        assert!((st.q_phi.get(0, 0) - 2.5).abs() < 1e-9);
    }

    #[test]
    fn value_iteration_variant_tracks_one_step_iterates() {
        // κ = 0: each iteration solves q ← R + γ max q_phi, then copies φ ← θ
        let mdp = two_state(0.9);
        let batch = sweep(&mdp);
        let mut st = QLearnerState::new(2, 2, 0.5, 1);
        let mut v = ValueTable::zeros(2);
        for _ in 0..6 {
            for _ in 0..200 {
                st.improve(&batch, 0.9, k(0.0), ShapingValue::Max);
            }
            st.q_phi = st.q_theta.clone();
            v = crate::kappa::kappa_bellman(&mdp, &v, k(0.0), 1e-12).unwrap();
            assert!(st.q_phi.max_values().sup_dist(&v) < 1e-2);
        }
    }
}

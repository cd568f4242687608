//! Softmax policy-gradient learners for κ-PI and κ-VI, and the GAE mode.
//!
//! Tables: `v_theta` fits the κ-shaped returns `R_j(κ, V_φ)` of the
//! surrogate problem, `v_phi` fits the discounted returns `ρ_j` of the
//! original problem, and `logits` parametrise a softmax policy. The
//! trust-region step is replaced by plain ascent with the step clipped to
//! `‖Δ‖_∞ ≤ step_cap`.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::Result;
use crate::kappa::KappaParams;
use crate::policy::Policy;
use crate::rng::RunRngs;
use crate::value::ValueTable;

use super::{sample_index, EpisodeTracker, Evaluator, LogRow, RunSetup, TrainingLog, Trajectory, Transition};

/// Which value table serves as the advantage baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    #[default]
    Theta,
    Phi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgHyper {
    pub lr_value: f64,
    pub lr_logits: f64,
    pub entropy_coef: f64,
    pub step_cap: f64,
    /// Steps per rollout.
    pub rollout_len: usize,
    /// Passes over an iteration's rollouts in the evaluation phase.
    pub eval_epochs: usize,
    pub baseline: Baseline,
}

impl Default for PgHyper {
    fn default() -> Self {
        Self {
            lr_value: 0.05,
            lr_logits: 0.01,
            entropy_coef: 0.01,
            step_cap: 1.0,
            rollout_len: 50,
            eval_epochs: 1,
            baseline: Baseline::Theta,
        }
    }
}

/// Handling of the return tail where a trajectory stops without reaching
/// a terminal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tail {
    /// Add the discounted `v_phi` of the last next-state.
    #[default]
    Bootstrap,
    /// Stop the sums at the cut.
    Truncate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgLearnerState {
    pub v_theta: ValueTable,
    pub v_phi: ValueTable,
    /// Row-major `z[s][a]`.
    pub logits: Vec<f64>,
    pub n_actions: usize,
    pub hyper: PgHyper,
}

impl PgLearnerState {
    pub fn new(n_states: usize, n_actions: usize, hyper: PgHyper) -> Self {
        Self {
            v_theta: ValueTable::zeros(n_states),
            v_phi: ValueTable::zeros(n_states),
            logits: vec![0.0; n_states * n_actions],
            n_actions,
            hyper,
        }
    }

    pub fn probs(&self, s: usize) -> Vec<f64> {
        softmax(&self.logits[s * self.n_actions..(s + 1) * self.n_actions])
    }

    pub fn policy(&self) -> Policy {
        let probs = self.logits.chunks(self.n_actions).flat_map(softmax).collect();
        Policy::Stochastic { n_actions: self.n_actions, probs }
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    z.iter().map(|x| x - lse).collect()
}

/// `m` steps of the softmax policy from the environment's current state;
/// episodes that end inside the window restart.
pub fn rollout(env: &mut dyn Environment, logits: &[f64], m: usize, rng: &mut ChaCha8Rng) -> Trajectory {
    let na = env.n_actions();
    let mut s = env.state();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let probs = softmax(&logits[s * na..(s + 1) * na]);
        let a = sample_index(rng, probs.into_iter());
        let step = env.step(a);
        let t = Transition {
            s,
            a,
            r: step.reward,
            s_next: step.next_state,
            terminal: step.terminal,
            truncated: step.truncated,
        };
        out.push(t);
        s = if t.ends_episode() { env.reset() } else { t.s_next };
    }
    out
}

/// `(R_j(κ, v_phi), ρ_j)` for every step, bootstrapping at cuts.
pub fn kappa_returns(traj: &[Transition], v_phi: &ValueTable, gamma: f64, params: KappaParams) -> Vec<(f64, f64)> {
    kappa_returns_with_tail(traj, v_phi, gamma, params, Tail::Bootstrap)
}

/// Backward recursion
///
/// ```text
/// R_j = r_j + γ(1−κ_s) v(s_{j+1}) + γκ_d R_{j+1}
/// ρ_j = r_j + γ ρ_{j+1}
/// ```
///
/// with `v = 0` past terminals. Episodes cut by a time limit or by the end
/// of the trajectory continue with `v(s_{j+1})` under [`Tail::Bootstrap`]
/// and with zero under [`Tail::Truncate`].
pub fn kappa_returns_with_tail(
    traj: &[Transition],
    v_phi: &ValueTable,
    gamma: f64,
    params: KappaParams,
    tail: Tail,
) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); traj.len()];
    let mut next = (0.0, 0.0);
    for (j, t) in traj.iter().enumerate().rev() {
        let v_next = if t.terminal { 0.0 } else { v_phi[t.s_next] };
        let cut = t.ends_episode() || j + 1 == traj.len();
        if cut {
            next = match tail {
                Tail::Bootstrap => (v_next, v_next),
                Tail::Truncate => (0.0, 0.0),
            };
        }
        let shaped = t.r + gamma * (1.0 - params.kappa_s) * v_next;
        let r_kappa = shaped + gamma * params.kappa_d * next.0;
        let rho = t.r + gamma * next.1;
        out[j] = (r_kappa, rho);
        next = (r_kappa, rho);
    }
    out
}

/// `Σ_{t≥j} (γλ)^{t−j} δ_t` with `δ_t = r_t + γ v(s_{t+1}) − v(s_t)`, the
/// sums restarting at episode boundaries.
pub fn gae_advantages(traj: &[Transition], v: &ValueTable, gamma: f64, lambda: f64) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for (j, t) in traj.iter().enumerate().rev() {
        if t.ends_episode() || j + 1 == traj.len() {
            acc = 0.0;
        }
        let v_next = if t.terminal { 0.0 } else { v[t.s_next] };
        let delta = t.r + gamma * v_next - v[t.s];
        acc = delta + gamma * lambda * acc;
        out[j] = acc;
    }
    out
}

/// `max_j |(R_j(κ, v) − v(s_j)) − Σ_{t≥j}(γκ)^{t−j} δ_t|`.
pub fn advantage_identity_check(traj: &[Transition], v_phi: &ValueTable, gamma: f64, kappa: f64) -> f64 {
    let params = KappaParams { kappa_d: kappa, kappa_s: kappa };
    let returns = kappa_returns(traj, v_phi, gamma, params);
    let gae = gae_advantages(traj, v_phi, gamma, kappa);
    traj.iter()
        .zip(returns.iter().zip(&gae))
        .map(|(t, ((r, _), g))| ((r - v_phi[t.s]) - g).abs())
        .fold(0.0, f64::max)
}

/// Gradient of [`surrogate_objective`] with respect to the logits.
pub fn policy_gradient(
    logits: &[f64],
    n_actions: usize,
    traj: &[Transition],
    advantages: &[f64],
    entropy_coef: f64,
) -> Vec<f64> {
    let mut g = vec![0.0; logits.len()];
    if traj.is_empty() {
        return g;
    }
    let scale = 1.0 / traj.len() as f64;
    for (t, &adv) in traj.iter().zip(advantages) {
        let row = &logits[t.s * n_actions..(t.s + 1) * n_actions];
        let pi = softmax(row);
        let log_pi = log_softmax(row);
        let entropy: f64 = -pi.iter().zip(&log_pi).map(|(p, l)| p * l).sum::<f64>();
        for a in 0..n_actions {
            let indicator = if a == t.a { 1.0 } else { 0.0 };
            let score = adv * (indicator - pi[a]);
            let d_entropy = -pi[a] * (log_pi[a] + entropy);
            g[t.s * n_actions + a] += scale * (score + entropy_coef * d_entropy);
        }
    }
    g
}

/// `(1/N) Σ_j [A_j log π(a_j | s_j) + c·H(π(· | s_j))]`.
pub fn surrogate_objective(
    logits: &[f64],
    n_actions: usize,
    traj: &[Transition],
    advantages: &[f64],
    entropy_coef: f64,
) -> f64 {
    let mut total = 0.0;
    for (t, &adv) in traj.iter().zip(advantages) {
        let row = &logits[t.s * n_actions..(t.s + 1) * n_actions];
        let log_pi = log_softmax(row);
        let entropy: f64 = -log_pi.iter().map(|l| l.exp() * l).sum::<f64>();
        total += adv * log_pi[t.a] + entropy_coef * entropy;
    }
    total / traj.len().max(1) as f64
}

/// Moves each visited state's value toward the batch mean of its targets.
fn fit_values(v: &mut ValueTable, traj: &[Transition], targets: impl Iterator<Item = f64>, lr: f64) {
    let mut sums = vec![0.0; v.len()];
    let mut counts = vec![0usize; v.len()];
    for (t, y) in traj.iter().zip(targets) {
        sums[t.s] += y;
        counts[t.s] += 1;
    }
    for s in 0..v.len() {
        if counts[s] > 0 {
            let mean = sums[s] / counts[s] as f64;
            v[s] += lr * (mean - v[s]);
        }
    }
}

fn ascend(state: &mut PgLearnerState, traj: &[Transition], advantages: &[f64]) -> Vec<f64> {
    let h = &state.hyper;
    let g = policy_gradient(&state.logits, state.n_actions, traj, advantages, h.entropy_coef);
    let mut step: Vec<f64> = g.iter().map(|x| h.lr_logits * x).collect();
    let largest = step.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if largest > h.step_cap {
        let shrink = h.step_cap / largest;
        step.iter_mut().for_each(|x| *x *= shrink);
    }
    for (z, d) in state.logits.iter_mut().zip(&step) {
        *z += d;
    }
    step
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgMode {
    /// Fit `v_theta` to `R_j(κ, V_φ)` and step the logits.
    Improve,
    /// Fit `v_phi` to `ρ_j`.
    Evaluate,
}

/// One update from a trajectory and its `(R_j, ρ_j)` pairs. Returns the
/// logit change (all zeros when evaluating).
pub fn pg_update(state: &mut PgLearnerState, traj: &[Transition], returns: &[(f64, f64)], mode: PgMode) -> Vec<f64> {
    let lr = state.hyper.lr_value;
    match mode {
        PgMode::Improve => {
            fit_values(&mut state.v_theta, traj, returns.iter().map(|r| r.0), lr);
            let baseline = match state.hyper.baseline {
                Baseline::Theta => &state.v_theta,
                Baseline::Phi => &state.v_phi,
            };
            let adv: Vec<f64> = traj.iter().zip(returns).map(|(t, r)| r.0 - baseline[t.s]).collect();
            ascend(state, traj, &adv)
        }
        PgMode::Evaluate => {
            fit_values(&mut state.v_phi, traj, returns.iter().map(|r| r.1), lr);
            vec![0.0; state.logits.len()]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PgVariant {
    /// Separate evaluation phase fitting `v_phi` to `ρ`.
    PolicyIteration,
    /// `v_phi ← v_theta` at the end of each iteration.
    ValueIteration,
    /// GAE advantages with the given λ and a single value table `v_phi`.
    Gae { lambda: f64 },
}

/// A policy-gradient run in progress. One schedule sample is one rollout.
pub struct PgAgent<'a> {
    pub state: PgLearnerState,
    pub setup: RunSetup,
    pub variant: PgVariant,
    pub env_steps: u64,
    /// Logit change of the most recent improvement step.
    pub last_step: Vec<f64>,
    env: &'a mut dyn Environment,
    rngs: &'a mut RunRngs,
    tracker: EpisodeTracker,
}

impl<'a> PgAgent<'a> {
    pub fn new(
        env: &'a mut dyn Environment,
        setup: RunSetup,
        hyper: PgHyper,
        variant: PgVariant,
        rngs: &'a mut RunRngs,
    ) -> Self {
        let state = PgLearnerState::new(env.n_states(), env.n_actions(), hyper);
        env.reset();
        Self { state, setup, variant, env_steps: 0, last_step: Vec::new(), env, rngs, tracker: EpisodeTracker::default() }
    }

    fn collect(&mut self) -> Trajectory {
        let m = self.state.hyper.rollout_len.max(1);
        let traj = rollout(self.env, &self.state.logits, m, &mut self.rngs.policy);
        self.env_steps += traj.len() as u64;
        traj.iter().for_each(|t| self.tracker.observe(t));
        traj
    }

    fn evaluate_phi(&mut self, batches: &[Trajectory]) {
        let (gamma, params) = (self.setup.gamma, self.setup.params);
        for _ in 0..self.state.hyper.eval_epochs {
            for traj in batches {
                let returns = kappa_returns(traj, &self.state.v_phi, gamma, params);
                pg_update(&mut self.state, traj, &returns, PgMode::Evaluate);
            }
        }
    }

    /// Runs outer iteration `i` (0-based).
    pub fn run_iteration(&mut self, i: u64) {
        let rollouts = self.setup.schedule.samples_in(i);
        let (gamma, params) = (self.setup.gamma, self.setup.params);
        let mut batches = Vec::with_capacity(rollouts as usize);
        for _ in 0..rollouts {
            let traj = self.collect();
            match self.variant {
                PgVariant::Gae { lambda } => {
                    let adv = gae_advantages(&traj, &self.state.v_phi, gamma, lambda);
                    self.last_step = ascend(&mut self.state, &traj, &adv);
                    self.evaluate_phi(std::slice::from_ref(&traj));
                }
                _ => {
                    let returns = kappa_returns(&traj, &self.state.v_phi, gamma, params);
                    self.last_step = pg_update(&mut self.state, &traj, &returns, PgMode::Improve);
                    batches.push(traj);
                }
            }
        }
        match self.variant {
            PgVariant::PolicyIteration => self.evaluate_phi(&batches),
            PgVariant::ValueIteration => self.state.v_phi = self.state.v_theta.clone(),
            PgVariant::Gae { .. } => {}
        }
    }

    pub fn policy(&self) -> Policy {
        self.state.policy()
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

pub fn kpi_pg(
    env: &mut dyn Environment,
    setup: RunSetup,
    hyper: PgHyper,
    rngs: &mut RunRngs,
    evaluator: &mut Evaluator,
) -> Result<TrainingLog> {
    PgAgent::new(env, setup, hyper, PgVariant::PolicyIteration, rngs).run(evaluator)
}

pub fn kvi_pg(
    env: &mut dyn Environment,
    setup: RunSetup,
    hyper: PgHyper,
    rngs: &mut RunRngs,
    evaluator: &mut Evaluator,
) -> Result<TrainingLog> {
    PgAgent::new(env, setup, hyper, PgVariant::ValueIteration, rngs).run(evaluator)
}

/// GAE(λ): one rollout per iteration, so `setup.schedule` should be naive.
pub fn gae_mode(
    env: &mut dyn Environment,
    setup: RunSetup,
    lambda: f64,
    hyper: PgHyper,
    rngs: &mut RunRngs,
    evaluator: &mut Evaluator,
) -> Result<TrainingLog> {
    PgAgent::new(env, setup, hyper, PgVariant::Gae { lambda }, rngs).run(evaluator)
}

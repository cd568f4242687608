//! Multi-step greedy operators built from a shaped, shorter-horizon
//! surrogate problem.
//!
//! Given a value estimate `v`, the surrogate keeps the dynamics and initial
//! distribution of the original MDP, discounts by `γ·κ_d` and pays
//!
//! ```text
//! R̂(s, a) = R(s, a) + γ(1 − κ_s) Σ_{s'} P(s' | s, a) v(s')
//! ```
//!
//! Its optimal value is `𝒯_κ v` and its optimal policy is κ-greedy with
//! respect to `v`. `κ = 0` recovers the one-step operator; `κ = 1` recovers
//! the original problem.

use serde::{Deserialize, Serialize};

use crate::dp::{optimal_values, SolveOptions};
use crate::error::{invalid, Error, Result};
use crate::eval::greedy_policy;
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::value::{QTable, ValueTable};

/// The two roles of κ: `kappa_d` shrinks the discount, `kappa_s` weights
/// the bootstrap value folded into the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaParams {
    pub kappa_d: f64,
    pub kappa_s: f64,
}

impl KappaParams {
    pub fn standard(kappa: f64) -> Result<Self> {
        Self::split(kappa, kappa)
    }

    pub fn split(kappa_d: f64, kappa_s: f64) -> Result<Self> {
        for (name, k) in [("kappa_d", kappa_d), ("kappa_s", kappa_s)] {
            if !(0.0..=1.0).contains(&k) {
                return Err(invalid(name, format!("{k} not in [0, 1]")));
            }
        }
        Ok(Self { kappa_d, kappa_s })
    }

    pub fn is_standard(&self) -> bool {
        self.kappa_d == self.kappa_s
    }

    /// The common value in standard mode.
    pub fn kappa(&self) -> Option<f64> {
        self.is_standard().then_some(self.kappa_d)
    }
}

/// Surrogate problem for a given `(v, κ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateMdp {
    Discounted(TabularMdp),
    /// `κ_d = 0`: the optimal value is `max_a R̂(s, a)`.
    OneStep { reward: QTable },
}

impl SurrogateMdp {
    pub fn discount(&self) -> f64 {
        match self {
            SurrogateMdp::Discounted(m) => m.discount(),
            SurrogateMdp::OneStep { .. } => 0.0,
        }
    }

    /// Shaped reward table `R̂[s][a]`.
    pub fn reward(&self) -> QTable {
        match self {
            SurrogateMdp::Discounted(m) => QTable::from_vec(m.n_states(), m.n_actions(), m.rewards().to_vec()),
            SurrogateMdp::OneStep { reward } => reward.clone(),
        }
    }

    /// Optimal action values, with the state values within `tol` of optimal.
    pub fn solve(&self, tol: f64) -> Result<QTable> {
        match self {
            SurrogateMdp::Discounted(m) => {
                let (v, _) = optimal_values(m, &SolveOptions::new(tol))?;
                crate::eval::q_from_v(m, &v)
            }
            SurrogateMdp::OneStep { reward } => Ok(reward.clone()),
        }
    }
}

fn check_shape(mdp: &TabularMdp, v: &ValueTable) -> Result<()> {
    if v.len() != mdp.n_states() {
        return Err(Error::ShapeMismatch { expected: mdp.n_states(), got: v.len() });
    }
    if !v.is_finite() {
        return Err(invalid("v", "value table has non-finite entries"));
    }
    Ok(())
}

/// `R̂[s][a] = R[s][a] + γ(1 − κ_s) Σ P v`, with `v` zeroed on terminals.
pub fn shaped_reward(mdp: &TabularMdp, v: &ValueTable, kappa_s: f64) -> Result<QTable> {
    check_shape(mdp, v)?;
    let v = mdp.zero_terminals(v);
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    // same grouping as the one-step backup so κ_s = 0 reproduces it bit for bit
    let weight = mdp.discount() * (1.0 - kappa_s);
    let mut out = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            out.set(s, a, mdp.reward(s, a) + weight * mdp.expected_next(s, a, v.as_slice()));
        }
    }
    Ok(out)
}

pub fn build_surrogate(mdp: &TabularMdp, v: &ValueTable, params: KappaParams) -> Result<SurrogateMdp> {
    let reward = shaped_reward(mdp, v, params.kappa_s)?;
    if params.kappa_d == 0.0 {
        return Ok(SurrogateMdp::OneStep { reward });
    }
    let discount = mdp.discount() * params.kappa_d;
    Ok(SurrogateMdp::Discounted(mdp.with_rewards(reward.as_slice().to_vec(), discount)?))
}

/// Optimal surrogate action values; both `𝒯_κ v` and the κ-greedy policy
/// derive from them.
pub fn kappa_q(mdp: &TabularMdp, v: &ValueTable, params: KappaParams, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    build_surrogate(mdp, v, params)?.solve(tol)
}

/// `𝒯_κ v`.
pub fn kappa_bellman(mdp: &TabularMdp, v: &ValueTable, params: KappaParams, tol: f64) -> Result<ValueTable> {
    Ok(kappa_q(mdp, v, params, tol)?.max_values())
}

/// κ-greedy policy with respect to `v`; ties go to the lowest action.
pub fn kappa_greedy(mdp: &TabularMdp, v: &ValueTable, params: KappaParams, tol: f64) -> Result<Policy> {
    Ok(greedy_policy(&kappa_q(mdp, v, params, tol)?))
}

/// `1 / (1 − γ κ_d)`.
pub fn effective_horizon(gamma: f64, kappa_d: f64) -> Result<f64> {
    let gk = gamma * kappa_d;
    if !(gk < 1.0) || gk < 0.0 {
        return Err(invalid("gamma", format!("γ·κ_d = {gk} must lie in [0, 1)")));
    }
    Ok(1.0 / (1.0 - gk))
}

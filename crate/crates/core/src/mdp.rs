//! Finite discounted MDPs with state-action rewards.
//!
//! Transitions are stored densely as `P[s][a][s']` and mirrored into a
//! per-(s, a) list of non-zero successors, which is what every backup in the
//! crate iterates over. Both views are built once at construction.

use std::fmt;

use crate::error::{Error, Result};
use crate::value::ValueTable;

/// Tolerance used by [`TabularMdp::validate`] for probability sums.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
    terminal: Vec<bool>,
}

/// A single broken invariant reported by [`TabularMdp::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Row `P[s][a][·]` does not sum to one; `deficit = 1 - sum`.
    RowSum { state: usize, action: usize, sum: f64, deficit: f64 },
    NegativeProbability { state: usize, action: usize, next: usize, value: f64 },
    NonFiniteProbability { state: usize, action: usize, next: usize },
    NonFiniteReward { state: usize, action: usize },
    InitialSum { sum: f64, deficit: f64 },
    NegativeInitial { state: usize, value: f64 },
    Discount { value: f64 },
    /// A terminal state that does not self-loop with probability one.
    TerminalNotAbsorbing { state: usize, action: usize, self_prob: f64 },
    TerminalReward { state: usize, action: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::RowSum { state, action, sum, deficit } => write!(
                f,
                "P[{state}][{action}] sums to {sum} (deficit {deficit:e})"
            ),
            Violation::NegativeProbability { state, action, next, value } => {
                write!(f, "P[{state}][{action}][{next}] = {value} is negative")
            }
            Violation::NonFiniteProbability { state, action, next } => {
                write!(f, "P[{state}][{action}][{next}] is not finite")
            }
            Violation::NonFiniteReward { state, action } => {
                write!(f, "R[{state}][{action}] is not finite")
            }
            Violation::InitialSum { sum, deficit } => {
                write!(f, "initial distribution sums to {sum} (deficit {deficit:e})")
            }
            Violation::NegativeInitial { state, value } => {
                write!(f, "initial probability of state {state} is negative ({value})")
            }
            Violation::Discount { value } => write!(f, "discount {value} outside (0, 1)"),
            Violation::TerminalNotAbsorbing { state, action, self_prob } => write!(
                f,
                "terminal state {state} under action {action} self-loops with probability {self_prob}"
            ),
            Violation::TerminalReward { state, action, value } => {
                write!(f, "terminal state {state} has reward {value} under action {action}")
            }
        }
    }
}

impl TabularMdp {
    /// Builds an MDP and rejects it if any invariant is violated.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let mdp = Self::from_parts(
            n_states,
            n_actions,
            transition,
            reward,
            discount,
            initial_dist,
            terminal,
        )?;
        mdp.ensure_valid()?;
        Ok(mdp)
    }

    /// Builds an MDP checking only that the buffers have consistent shapes.
    ///
    /// The result may violate the probability or discount invariants; call
    /// [`validate`](Self::validate) to list them.
    pub fn from_parts(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        check_len(n_states * n_actions * n_states, transition.len())?;
        check_len(n_states * n_actions, reward.len())?;
        check_len(n_states, initial_dist.len())?;
        check_len(n_states, terminal.len())?;
        let successors = (0..n_states * n_actions)
            .map(|sa| {
                let row = &transition[sa * n_states..(sa + 1) * n_states];
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(next, &p)| (next, p))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_states,
            n_actions,
            transition,
            successors,
            reward,
            discount,
            initial_dist,
            terminal,
        })
    }

    /// Lists every invariant violation; empty means the MDP is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (ns, na) = (self.n_states, self.n_actions);
        for s in 0..ns {
            for a in 0..na {
                let row = self.row(s, a);
                let mut sum = 0.0;
                for (next, &p) in row.iter().enumerate() {
                    if !p.is_finite() {
                        out.push(Violation::NonFiniteProbability { state: s, action: a, next });
                    } else if p < 0.0 {
                        out.push(Violation::NegativeProbability { state: s, action: a, next, value: p });
                    }
                    sum += p;
                }
                if sum.is_finite() && (sum - 1.0).abs() > PROB_TOL {
                    out.push(Violation::RowSum { state: s, action: a, sum, deficit: 1.0 - sum });
                }
                let r = self.reward(s, a);
                if !r.is_finite() {
                    out.push(Violation::NonFiniteReward { state: s, action: a });
                }
                if self.terminal[s] {
                    let self_prob = row[s];
                    if self_prob != 1.0 {
                        out.push(Violation::TerminalNotAbsorbing { state: s, action: a, self_prob });
                    }
                    if r != 0.0 {
                        out.push(Violation::TerminalReward { state: s, action: a, value: r });
                    }
                }
            }
        }
        let mut sum = 0.0;
        for (s, &m) in self.initial_dist.iter().enumerate() {
            if m < 0.0 {
                out.push(Violation::NegativeInitial { state: s, value: m });
            }
            sum += m;
        }
        if (sum - 1.0).abs() > PROB_TOL || !sum.is_finite() {
            out.push(Violation::InitialSum { sum, deficit: 1.0 - sum });
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            out.push(Violation::Discount { value: self.discount });
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            return Ok(());
        }
        let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Err(Error::InvalidMdp(msg))
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    /// Dense row `P[s][a][·]`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Non-zero entries of `P[s][a][·]` in increasing successor order.
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.successors[s * self.n_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Row-major `R[s][a]`.
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal
    }

    /// `max |R(s, a)|`.
    pub fn r_max(&self) -> f64 {
        self.reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// `R_max / (1 - γ)`.
    pub fn v_max(&self) -> f64 {
        self.r_max() / (1.0 - self.discount)
    }

    /// `Σ_{s'} P[s][a][s'] v[s']`.
    #[inline]
    pub fn expected_next(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        self.successors(s, a).iter().map(|&(next, p)| p * v[next]).sum()
    }

    /// Copy of this MDP with another discount, validated.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        let mut out = self.clone();
        out.discount = discount;
        out.ensure_valid()?;
        Ok(out)
    }

    /// Copy of this MDP with another reward table (same dynamics), validated.
    pub fn with_rewards(&self, reward: Vec<f64>, discount: f64) -> Result<Self> {
        check_len(self.n_states * self.n_actions, reward.len())?;
        let mut out = self.clone();
        out.reward = reward;
        out.discount = discount;
        out.ensure_valid()?;
        Ok(out)
    }

    /// Copies `v` with every terminal entry forced to zero.
    pub fn zero_terminals(&self, v: &ValueTable) -> ValueTable {
        let mut out = v.clone();
        for (s, &t) in self.terminal.iter().enumerate() {
            if t {
                out[s] = 0.0;
            }
        }
        out
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}

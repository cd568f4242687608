//! Tabular dynamic programming and model-free learning with multi-step
//! (κ-greedy) policies.
//!
//! * [`mdp`], [`value`], [`policy`], [`eval`]: the finite-MDP data model and
//!   exact evaluation.
//! * [`kappa`]: the shaped surrogate problem, `𝒯_κ` and κ-greedy policies.
//! * [`dp`]: value/policy iteration and κ-VI/κ-PI with diagnostics.
//! * [`schedule`]: iteration counts and per-iteration sample budgets.
//! * [`model_free`]: tabular Q-learning and softmax policy-gradient learners.
//! * [`envs`]: gridworld, chain, Garnet and binned classic-control tasks.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod envs;
pub mod error;
pub mod eval;
pub mod io;
pub mod kappa;
pub mod mdp;
pub mod model_free;
pub mod policy;
pub mod rng;
pub mod schedule;
pub mod value;

pub use dp::{
    kappa_policy_iteration, kappa_value_iteration, policy_iteration, value_iteration, IterationRecord,
    SolveOptions, SolveReport,
};
pub use envs::{EnvSpec, Environment};
pub use error::{Error, Result};
pub use eval::{expected_return, greedy_policy, policy_evaluation_exact, q_from_v};
pub use kappa::{build_surrogate, kappa_bellman, kappa_greedy, shaped_reward, KappaParams, SurrogateMdp};
pub use mdp::{TabularMdp, Violation};
pub use policy::Policy;
pub use schedule::{contraction_rate, iterations_for_accuracy, make_schedule, KappaSchedule};
pub use value::{QTable, ValueTable};

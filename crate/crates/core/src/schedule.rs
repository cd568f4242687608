//! Sample-budget planning: how many outer iterations a κ run gets and how
//! many samples each iteration may spend.
//!
//! The number of iterations `N` is the smallest count whose contraction
//! `ξ^N` reaches the target accuracy `c_fa`; the budget `T` is then split as
//! `T_κ = ⌊T / N⌋` per iteration with the remainder given to the last one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kappa::KappaParams;

/// `ξ = γ(1 − κ) / (1 − γκ)`.
pub fn contraction_rate(gamma: f64, kappa: f64) -> f64 {
    gamma * (1.0 - kappa) / (1.0 - gamma * kappa)
}

/// Rate of the split operator, `γ(1 − κ_s) / (1 − γκ_d)`, capped at `γ`.
///
/// Equals [`contraction_rate`] when `κ_d = κ_s`. The cap keeps budgets sane
/// when `κ_s < κ_d`, where the split operator need not contract.
pub fn split_contraction_rate(gamma: f64, params: KappaParams) -> f64 {
    if params.is_standard() {
        return contraction_rate(gamma, params.kappa_d);
    }
    (gamma * (1.0 - params.kappa_s) / (1.0 - gamma * params.kappa_d)).min(gamma)
}

fn iterations_for_rate(xi: f64, c_fa: f64) -> u64 {
    if xi <= 0.0 {
        return 1;
    }
    (c_fa.ln() / xi.ln()).ceil().max(1.0) as u64
}

/// `N = max(1, ⌈ln c_fa / ln ξ⌉)`; `κ = 1` needs a single iteration.
pub fn iterations_for_accuracy(gamma: f64, kappa: f64, c_fa: f64) -> u64 {
    iterations_for_rate(contraction_rate(gamma, kappa), c_fa)
}

/// As [`iterations_for_accuracy`] with the rate of [`split_contraction_rate`].
pub fn split_iterations_for_accuracy(gamma: f64, params: KappaParams, c_fa: f64) -> u64 {
    iterations_for_rate(split_contraction_rate(gamma, params), c_fa)
}

/// How the iteration count was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IterationRule {
    Accuracy { c_fa: f64 },
    /// One sample per iteration.
    Naive,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSchedule {
    pub gamma: f64,
    pub params: KappaParams,
    pub rule: IterationRule,
    pub total_samples: u64,
    pub xi: f64,
    pub n_iterations: u64,
    pub samples_per_iter: u64,
    /// Extra samples granted to the last iteration.
    pub remainder: u64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("{gamma} not in (0, 1)")));
    }
    Ok(())
}

impl KappaSchedule {
    /// Splits `total` over `n` iterations.
    pub fn fixed(gamma: f64, params: KappaParams, n: u64, total: u64) -> Result<Self> {
        Self::build(gamma, params, IterationRule::Fixed, n, total)
    }

    fn build(gamma: f64, params: KappaParams, rule: IterationRule, n: u64, total: u64) -> Result<Self> {
        check_gamma(gamma)?;
        if n == 0 {
            return Err(invalid("n_iterations", "need at least one iteration"));
        }
        if total < n {
            return Err(Error::InfeasibleBudget { iterations: n as usize, total });
        }
        Ok(Self {
            gamma,
            params,
            rule,
            total_samples: total,
            xi: split_contraction_rate(gamma, params),
            n_iterations: n,
            samples_per_iter: total / n,
            remainder: total % n,
        })
    }

    pub fn kappa(&self) -> Option<f64> {
        self.params.kappa()
    }

    /// Budget of iteration `i` (0-based).
    pub fn samples_in(&self, i: u64) -> u64 {
        if i + 1 == self.n_iterations {
            self.samples_per_iter + self.remainder
        } else {
            self.samples_per_iter
        }
    }
}

pub fn make_schedule(gamma: f64, kappa: f64, c_fa: f64, total_samples: u64) -> Result<KappaSchedule> {
    make_split_schedule(gamma, KappaParams::standard(kappa)?, c_fa, total_samples)
}

/// As [`make_schedule`] with the rate of [`split_contraction_rate`].
pub fn make_split_schedule(gamma: f64, params: KappaParams, c_fa: f64, total_samples: u64) -> Result<KappaSchedule> {
    check_gamma(gamma)?;
    if !(c_fa > 0.0 && c_fa < 1.0) {
        return Err(invalid("c_fa", format!("{c_fa} not in (0, 1)")));
    }
    let n = iterations_for_rate(split_contraction_rate(gamma, params), c_fa);
    KappaSchedule::build(gamma, params, IterationRule::Accuracy { c_fa }, n, total_samples)
}

/// `N = T`, one sample per iteration.
pub fn naive_schedule(gamma: f64, params: KappaParams, total_samples: u64) -> Result<KappaSchedule> {
    KappaSchedule::build(gamma, params, IterationRule::Naive, total_samples, total_samples)
}

//! Exact solvers: value iteration, policy iteration and their κ-greedy
//! counterparts, with per-iteration diagnostics.
//!
//! Canonical starts are `V₀ = 0` and `π₀ = action 0 everywhere`. Value
//! iteration (including every surrogate solve) stops once the last update
//! `δ` satisfies `δ·γ/(1−γ) ≤ tol`, which bounds the distance of the
//! returned values to the fixed point by `tol`.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::eval::{
    bellman_optimal, expected_return, greedy_policy, iteration_cap, policy_evaluation_with, q_from_v,
    EvalMethod, DEFAULT_TOL,
};
use crate::kappa::{kappa_bellman, kappa_greedy, KappaParams};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::value::ValueTable;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// Optimal values; when present every record carries its sup-norm error.
    pub reference: Option<ValueTable>,
    pub initial_value: Option<ValueTable>,
    pub initial_policy: Option<Policy>,
    /// Keep every iterate (and every policy for the policy-iteration family).
    pub record_trace: bool,
    pub eval_method: EvalMethod,
    /// Overrides the automatic iteration cap of the unbounded solvers.
    pub max_iterations: Option<usize>,
}

impl SolveOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            reference: None,
            initial_value: None,
            initial_policy: None,
            record_trace: false,
            eval_method: EvalMethod::Direct,
            max_iterations: None,
        }
    }

    pub fn with_reference(mut self, v_star: ValueTable) -> Self {
        self.reference = Some(v_star);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn starting_from_policy(mut self, policy: Policy) -> Self {
        self.initial_policy = Some(policy);
        self
    }

    pub fn starting_from_value(mut self, v: ValueTable) -> Self {
        self.initial_value = Some(v);
        self
    }

    fn check(&self, mdp: &TabularMdp) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let ns = mdp.n_states();
        for v in self.reference.iter().chain(&self.initial_value) {
            if v.len() != ns {
                return Err(Error::ShapeMismatch { expected: ns, got: v.len() });
            }
        }
        if let Some(pi) = &self.initial_policy {
            pi.check(ns, mdp.n_actions())?;
        }
        Ok(())
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::new(DEFAULT_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖V − V*‖_∞` when the optimal values were supplied.
    pub sup_error: Option<f64>,
    /// `‖𝒯V − V‖_∞` for the standard optimal operator.
    pub residual: f64,
    /// `Σ_s μ(s) V(s)`.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub final_value: ValueTable,
    pub final_policy: Policy,
    /// Record of the starting point (iteration 0).
    pub initial: IterationRecord,
    /// One record per executed iteration, numbered from 1.
    pub per_iteration: Vec<IterationRecord>,
    pub iterations: usize,
    /// The policy became stable before the requested iteration count.
    pub stopped_early: bool,
    /// `V₀, V₁, …` when tracing was requested.
    pub values: Vec<ValueTable>,
    /// `π₀, π₁, …` for the policy-iteration family when tracing was requested.
    pub policies: Vec<Policy>,
}

impl SolveReport {
    /// Initial record followed by the per-iteration ones.
    pub fn records(&self) -> impl Iterator<Item = &IterationRecord> {
        std::iter::once(&self.initial).chain(&self.per_iteration)
    }

    /// CSV with columns `iter,sup_error,residual,eta`; unknown errors are empty.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "iter,sup_error,residual,eta")?;
        for r in self.records() {
            let err = r.sup_error.map(|e| e.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.iter, err, r.residual, r.eta)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn record(mdp: &TabularMdp, opts: &SolveOptions, iter: usize, v: &ValueTable, residual: f64) -> IterationRecord {
    IterationRecord {
        iter,
        sup_error: opts.reference.as_ref().map(|r| r.sup_dist(v)),
        residual,
        eta: expected_return(mdp, v),
    }
}

fn vi_cap(mdp: &TabularMdp, opts: &SolveOptions, start: &ValueTable) -> usize {
    let g = mdp.discount();
    let scale = mdp.v_max() + start.max_norm();
    opts.max_iterations.unwrap_or_else(|| iteration_cap(g, opts.tol * (1.0 - g), scale))
}

fn vi_done(g: f64, delta: f64, tol: f64, v: &ValueTable) -> bool {
    // second clause: updates have reached rounding noise
    delta * g / (1.0 - g) <= tol || delta <= 8.0 * f64::EPSILON * v.max_norm()
}

/// Optimal values of `mdp` by value iteration; returns them with the number
/// of sweeps.
pub(crate) fn optimal_values(mdp: &TabularMdp, opts: &SolveOptions) -> Result<(ValueTable, usize)> {
    let mut v = opts.initial_value.clone().unwrap_or_else(|| ValueTable::zeros(mdp.n_states()));
    let g = mdp.discount();
    let cap = vi_cap(mdp, opts, &v);
    let mut delta = f64::INFINITY;
    for i in 1..=cap {
        let next = bellman_optimal(mdp, &v)?;
        delta = next.sup_dist(&v);
        v = next;
        if vi_done(g, delta, opts.tol, &v) {
            return Ok((v, i));
        }
    }
    Err(Error::NotConverged { iterations: cap, last_delta: delta })
}

pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<SolveReport> {
    value_iteration_with(mdp, &SolveOptions::new(tol))
}

pub fn value_iteration_with(mdp: &TabularMdp, opts: &SolveOptions) -> Result<SolveReport> {
    opts.check(mdp)?;
    let g = mdp.discount();
    let mut v = opts.initial_value.clone().unwrap_or_else(|| ValueTable::zeros(mdp.n_states()));
    let cap = vi_cap(mdp, opts, &v);
    let mut values = Vec::new();
    let mut records = Vec::new();
    let mut next = bellman_optimal(mdp, &v)?;
    let mut delta = next.sup_dist(&v);
    // the residual of an iterate is the size of the update that follows it
    let initial = record(mdp, opts, 0, &v, delta);
    for i in 1..=cap {
        if opts.record_trace {
            values.push(v.clone());
        }
        v = next;
        let converged = vi_done(g, delta, opts.tol, &v);
        next = bellman_optimal(mdp, &v)?;
        delta = next.sup_dist(&v);
        records.push(record(mdp, opts, i, &v, delta));
        if converged {
            if opts.record_trace {
                values.push(v.clone());
            }
            let final_policy = greedy_policy(&q_from_v(mdp, &v)?);
            return Ok(SolveReport {
                final_value: v,
                final_policy,
                initial,
                per_iteration: records,
                iterations: i,
                stopped_early: false,
                values,
                policies: Vec::new(),
            });
        }
    }
    Err(Error::NotConverged { iterations: cap, last_delta: delta })
}

/// Shared loop of the policy-iteration family. `improve` maps the values of
/// the current policy to the next policy.
fn policy_iteration_loop(
    mdp: &TabularMdp,
    opts: &SolveOptions,
    n_iterations: Option<usize>,
    mut improve: impl FnMut(&ValueTable) -> Result<Policy>,
) -> Result<SolveReport> {
    opts.check(mdp)?;
    let evaluate = |pi: &Policy| -> Result<ValueTable> {
        let v = policy_evaluation_with(mdp, pi, opts.tol, opts.eval_method)?;
        Ok(mdp.zero_terminals(&v))
    };
    let residual = |v: &ValueTable| -> Result<f64> { Ok(bellman_optimal(mdp, v)?.sup_dist(v)) };
    let mut pi = opts.initial_policy.clone().unwrap_or_else(|| Policy::first_action(mdp.n_states()));
    let mut v = evaluate(&pi)?;
    let initial = record(mdp, opts, 0, &v, residual(&v)?);
    let (mut values, mut policies) = (Vec::new(), Vec::new());
    if opts.record_trace {
        values.push(v.clone());
        policies.push(pi.clone());
    }
    let cap = n_iterations.or(opts.max_iterations).unwrap_or(10_000);
    let mut records = Vec::new();
    let mut stable = false;
    let mut stagnated = false;
    for i in 1..=cap {
        let next_pi = improve(&v)?;
        if next_pi == pi {
            stable = true;
        } else {
            let next_v = evaluate(&next_pi)?;
            // unbounded runs: a policy change that moves no value is a float tie
            stagnated = n_iterations.is_none() && next_v.sup_dist(&v) <= opts.tol;
            pi = next_pi;
            v = next_v;
        }
        records.push(record(mdp, opts, i, &v, residual(&v)?));
        if opts.record_trace {
            values.push(v.clone());
            policies.push(pi.clone());
        }
        if stable || stagnated {
            break;
        }
    }
    if n_iterations.is_none() && !stable && !stagnated {
        let last_delta = records.last().map_or(f64::NAN, |r| r.residual);
        return Err(Error::NotConverged { iterations: cap, last_delta });
    }
    let iterations = records.len();
    Ok(SolveReport {
        final_value: v,
        final_policy: pi,
        initial,
        per_iteration: records,
        iterations,
        stopped_early: n_iterations.is_some_and(|n| iterations < n),
        values,
        policies,
    })
}

pub fn policy_iteration(mdp: &TabularMdp, tol: f64) -> Result<SolveReport> {
    policy_iteration_with(mdp, &SolveOptions::new(tol))
}

pub fn policy_iteration_with(mdp: &TabularMdp, opts: &SolveOptions) -> Result<SolveReport> {
    policy_iteration_loop(mdp, opts, None, |v| Ok(greedy_policy(&q_from_v(mdp, v)?)))
}

pub fn kappa_policy_iteration(
    mdp: &TabularMdp,
    params: KappaParams,
    n_iterations: usize,
    tol: f64,
) -> Result<SolveReport> {
    kappa_policy_iteration_with(mdp, params, n_iterations, &SolveOptions::new(tol))
}

pub fn kappa_policy_iteration_with(
    mdp: &TabularMdp,
    params: KappaParams,
    n_iterations: usize,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if n_iterations == 0 {
        return Err(invalid("n_iterations", "need at least one iteration"));
    }
    policy_iteration_loop(mdp, opts, Some(n_iterations), |v| kappa_greedy(mdp, v, params, opts.tol))
}

pub fn kappa_value_iteration(
    mdp: &TabularMdp,
    params: KappaParams,
    n_iterations: usize,
    tol: f64,
) -> Result<SolveReport> {
    kappa_value_iteration_with(mdp, params, n_iterations, &SolveOptions::new(tol))
}

pub fn kappa_value_iteration_with(
    mdp: &TabularMdp,
    params: KappaParams,
    n_iterations: usize,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.check(mdp)?;
    if n_iterations == 0 {
        return Err(invalid("n_iterations", "need at least one iteration"));
    }
    let residual = |v: &ValueTable| -> Result<f64> { Ok(bellman_optimal(mdp, v)?.sup_dist(v)) };
    let mut v = opts.initial_value.clone().unwrap_or_else(|| ValueTable::zeros(mdp.n_states()));
    let initial = record(mdp, opts, 0, &v, residual(&v)?);
    let mut values = Vec::new();
    let mut records = Vec::with_capacity(n_iterations);
    for i in 1..=n_iterations {
        if opts.record_trace {
            values.push(v.clone());
        }
        v = kappa_bellman(mdp, &v, params, opts.tol)?;
        records.push(record(mdp, opts, i, &v, residual(&v)?));
    }
    if opts.record_trace {
        values.push(v.clone());
    }
    let final_policy = kappa_greedy(mdp, &v, params, opts.tol)?;
    Ok(SolveReport {
        final_value: v,
        final_policy,
        initial,
        per_iteration: records,
        iterations: n_iterations,
        stopped_early: false,
        values,
        policies: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{garnet_mdp, two_state, GO, STAY};
    use crate::eval::policy_evaluation_exact;
    use crate::schedule::contraction_rate;

    fn k(x: f64) -> KappaParams {
        KappaParams::standard(x).unwrap()
    }

    fn brute_force_optimum(mdp: &TabularMdp) -> (Vec<usize>, ValueTable) {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut best: Option<(Vec<usize>, ValueTable)> = None;
        for code in 0..na.pow(ns as u32) {
            let acts: Vec<usize> = (0..ns).map(|s| code / na.pow(s as u32) % na).collect();
            let v = policy_evaluation_exact(mdp, &Policy::Deterministic(acts.clone()), 1e-13).unwrap();
            let dominates = best.as_ref().is_none_or(|(_, b)| v.0.iter().zip(&b.0).all(|(x, y)| *x >= y - 1e-12)
                && v.0.iter().zip(&b.0).any(|(x, y)| *x > y + 1e-12));
            if dominates {
                best = Some((acts, v));
            }
        }
        best.unwrap()
    }

    #[test]
    fn two_state_optimum() {
        let mdp = two_state(0.9);
        let report = value_iteration(&mdp, 1e-10).unwrap();
        assert!((report.final_value[0] - 9.0).abs() < 1e-9);
        assert!((report.final_value[1] - 10.0).abs() < 1e-9);
        assert_eq!(report.final_policy, Policy::Deterministic(vec![GO, STAY]));
        let (acts, v) = brute_force_optimum(&mdp);
        assert_eq!(acts, vec![GO, STAY]);
        assert!(v.sup_dist(&report.final_value) < 1e-9);
        let pi = policy_iteration(&mdp, 1e-10).unwrap();
        assert_eq!(pi.final_policy, report.final_policy);
        assert!(pi.final_value.sup_dist(&report.final_value) < 1e-9);
    }

    #[test]
    fn zero_reward_and_single_state() {
        let zero = two_state(0.9).with_rewards(vec![0.0; 4], 0.9).unwrap();
        let report = value_iteration(&zero, 1e-10).unwrap();
        assert_eq!(report.final_value, ValueTable::zeros(2));
        assert_eq!(report.final_policy, Policy::Deterministic(vec![0, 0]));
        let single = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.5, vec![1.0], vec![false]).unwrap();
        let report = value_iteration(&single, 1e-12).unwrap();
        assert!((report.final_value[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn policy_iteration_from_optimum_is_stable() {
        let mdp = two_state(0.9);
        let opts = SolveOptions::new(1e-10).starting_from_policy(Policy::Deterministic(vec![GO, STAY]));
        let report = policy_iteration_with(&mdp, &opts).unwrap();
        assert_eq!(report.iterations, 1);
        assert_eq!(report.final_policy, Policy::Deterministic(vec![GO, STAY]));
    }

    #[test]
    fn garnet_solvers_agree() {
        let mdp = garnet_mdp(10, 3, 2, 7, 0.9).unwrap();
        let vi = value_iteration(&mdp, 1e-10).unwrap();
        let pi = policy_iteration(&mdp, 1e-10).unwrap();
        assert!(vi.final_value.sup_dist(&pi.final_value) < 1e-8);
    }

    #[test]
    fn kappa_zero_reproduces_standard_sequences() {
        let mdp = garnet_mdp(12, 3, 3, 5, 0.95).unwrap();
        let opts = SolveOptions::new(1e-10).with_trace();
        let pi = policy_iteration_with(&mdp, &opts).unwrap();
        let kpi = kappa_policy_iteration_with(&mdp, k(0.0), 1000, &opts).unwrap();
        assert_eq!(pi.policies, kpi.policies);
        assert_eq!(pi.values, kpi.values);
        let vi = value_iteration_with(&mdp, &opts).unwrap();
        let kvi = kappa_value_iteration_with(&mdp, k(0.0), 40, &opts).unwrap();
        assert_eq!(&vi.values[..41], &kvi.values[..]);
    }

    #[test]
    fn kappa_one_is_one_shot() {
        let mdp = garnet_mdp(10, 3, 2, 7, 0.9).unwrap();
        let v_star = value_iteration(&mdp, 1e-12).unwrap().final_value;
        let kpi = kappa_policy_iteration(&mdp, k(1.0), 1, 1e-10).unwrap();
        assert!(kpi.final_value.sup_dist(&v_star) < 1e-9);
        let kvi = kappa_value_iteration(&mdp, k(1.0), 1, 1e-10).unwrap();
        assert!(kvi.final_value.sup_dist(&v_star) < 1e-9);
    }

    #[test]
    fn kappa_pi_error_ratio_respects_rate() {
        let mdp = garnet_mdp(20, 5, 3, 3, 0.9).unwrap();
        let tol = 1e-10;
        let v_star = value_iteration(&mdp, 1e-12).unwrap().final_value;
        let opts = SolveOptions::new(tol).with_reference(v_star);
        let report = kappa_policy_iteration_with(&mdp, k(0.68), 10, &opts).unwrap();
        let xi = contraction_rate(0.9, 0.68);
        let errs: Vec<f64> = report.records().map(|r| r.sup_error.unwrap()).collect();
        for w in errs.windows(2) {
            if w[0] > 100.0 * tol {
                assert!(w[1] / w[0] <= xi + 0.01, "{errs:?}");
            }
        }
    }

    #[test]
    fn kappa_vi_contracts_on_two_state() {
        let mdp = two_state(0.9);
        let v_star = ValueTable(vec![9.0, 10.0]);
        let report = kappa_value_iteration(&mdp, k(0.5), 3, 1e-10).unwrap();
        let xi = 0.9 * 0.5 / (1.0 - 0.45);
        assert!((xi - contraction_rate(0.9, 0.5)).abs() < 1e-15);
        assert!(report.final_value.sup_dist(&v_star) <= xi.powi(3) * 10.0 + 1e-9);
    }

    #[test]
    fn csv_has_initial_row() {
        let mdp = two_state(0.9);
        let opts = SolveOptions::new(1e-8).with_reference(ValueTable(vec![9.0, 10.0]));
        let report = kappa_policy_iteration_with(&mdp, k(0.5), 3, &opts).unwrap();
        let csv = report.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iter,sup_error,residual,eta");
        assert_eq!(lines.len(), 2 + report.per_iteration.len());
        assert!(lines[1].starts_with("0,9,"));
        let bare = kappa_value_iteration(&mdp, k(0.5), 1, 1e-8).unwrap().to_csv_string();
        assert!(bare.lines().nth(1).unwrap().starts_with("0,,"));
    }

    #[test]
    fn rejects_zero_iterations() {
        assert!(kappa_value_iteration(&two_state(0.9), k(0.5), 0, 1e-8).is_err());
        assert!(kappa_policy_iteration(&two_state(0.9), k(0.5), 0, 1e-8).is_err());
    }
}

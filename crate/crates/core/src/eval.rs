//! Exact evaluation primitives shared by every solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::policy::Policy;
use crate::value::{sup_dist, QTable, ValueTable};

/// Default tolerance for exact evaluation and surrogate solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// How [`policy_evaluation_exact`] computes `V^π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMethod {
    /// LU solve of `(I - γ P_π) V = r_π`, polished by fixed-point sweeps
    /// if the residual is still above tolerance.
    #[default]
    Direct,
    /// Fixed-point sweeps `V ← r_π + γ P_π V` from zero.
    Iterative,
}

/// `V^π` with `‖V − (r_π + γ P_π V)‖_∞ ≤ tol`.
pub fn policy_evaluation_exact(mdp: &TabularMdp, policy: &Policy, tol: f64) -> Result<ValueTable> {
    policy_evaluation_with(mdp, policy, tol, EvalMethod::Direct)
}

pub fn policy_evaluation_with(
    mdp: &TabularMdp,
    policy: &Policy,
    tol: f64,
    method: EvalMethod,
) -> Result<ValueTable> {
    if !(tol > 0.0) {
        return Err(crate::error::invalid("tol", "must be positive"));
    }
    policy.check(mdp.n_states(), mdp.n_actions())?;
    let (r_pi, p_pi) = policy_model(mdp, policy);
    let start = match method {
        EvalMethod::Direct => direct_solve(mdp, &r_pi, &p_pi),
        EvalMethod::Iterative => None,
    };
    let start = start.unwrap_or_else(|| ValueTable::zeros(mdp.n_states()));
    if evaluation_residual(mdp, &r_pi, &p_pi, &start) <= tol {
        return Ok(start);
    }
    iterate_evaluation(mdp, &r_pi, &p_pi, start, tol)
}

/// Sparse `r_π` and `P_π` rows.
type PolicyModel = (Vec<f64>, Vec<Vec<(usize, f64)>>);

fn policy_model(mdp: &TabularMdp, policy: &Policy) -> PolicyModel {
    let na = mdp.n_actions();
    let mut r_pi = vec![0.0; mdp.n_states()];
    let mut p_pi = Vec::with_capacity(mdp.n_states());
    for (s, r) in r_pi.iter_mut().enumerate() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (a, w) in policy.support(s, na) {
            *r += w * mdp.reward(s, a);
            for &(next, p) in mdp.successors(s, a) {
                match row.iter_mut().find(|(n, _)| *n == next) {
                    Some(entry) => entry.1 += w * p,
                    None => row.push((next, w * p)),
                }
            }
        }
        row.sort_by_key(|&(n, _)| n);
        p_pi.push(row);
    }
    (r_pi, p_pi)
}

fn apply(mdp: &TabularMdp, r_pi: &[f64], p_pi: &[Vec<(usize, f64)>], v: &[f64]) -> Vec<f64> {
    let g = mdp.discount();
    r_pi.iter()
        .zip(p_pi)
        .map(|(r, row)| r + g * row.iter().map(|&(n, p)| p * v[n]).sum::<f64>())
        .collect()
}

fn evaluation_residual(mdp: &TabularMdp, r_pi: &[f64], p_pi: &[Vec<(usize, f64)>], v: &ValueTable) -> f64 {
    sup_dist(&apply(mdp, r_pi, p_pi, v.as_slice()), v.as_slice())
}

fn direct_solve(mdp: &TabularMdp, r_pi: &[f64], p_pi: &[Vec<(usize, f64)>]) -> Option<ValueTable> {
    let n = mdp.n_states();
    let g = mdp.discount();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (s, row) in p_pi.iter().enumerate() {
        for &(next, p) in row {
            a[(s, next)] -= g * p;
        }
    }
    let b = DVector::from_column_slice(r_pi);
    let x = a.lu().solve(&b)?;
    let v: Vec<f64> = x.iter().copied().collect();
    v.iter().all(|x| x.is_finite()).then_some(ValueTable(v))
}

/// Iteration cap for a γ-contraction started `dist0` away from its fixed point.
pub(crate) fn iteration_cap(gamma: f64, tol: f64, scale: f64) -> usize {
    if scale <= tol || gamma <= 0.0 {
        return 100;
    }
    let n = ((tol / scale).ln() / gamma.ln()).ceil();
    (n.max(0.0) as usize).saturating_add(100)
}

fn iterate_evaluation(
    mdp: &TabularMdp,
    r_pi: &[f64],
    p_pi: &[Vec<(usize, f64)>],
    start: ValueTable,
    tol: f64,
) -> Result<ValueTable> {
    let g = mdp.discount();
    let scale = mdp.r_max() + start.max_norm() * (1.0 - g);
    let cap = iteration_cap(g, tol, scale);
    let mut v = start.0;
    let mut delta = f64::INFINITY;
    for _ in 0..cap {
        let next = apply(mdp, r_pi, p_pi, &v);
        delta = sup_dist(&next, &v);
        v = next;
        // residual of the new iterate is at most γ·delta
        if g * delta <= tol {
            return Ok(ValueTable(v));
        }
    }
    Err(Error::NotConverged { iterations: cap, last_delta: delta })
}

/// One backup: `Q[s][a] = R[s][a] + γ Σ_{s'} P[s][a][s'] v[s']`.
pub fn q_from_v(mdp: &TabularMdp, v: &ValueTable) -> Result<QTable> {
    if v.len() != mdp.n_states() {
        return Err(Error::ShapeMismatch { expected: mdp.n_states(), got: v.len() });
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.discount();
    let mut q = QTable::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            q.set(s, a, mdp.reward(s, a) + g * mdp.expected_next(s, a, v.as_slice()));
        }
    }
    Ok(q)
}

/// Deterministic greedy policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QTable) -> Policy {
    Policy::Deterministic((0..q.n_states()).map(|s| q.argmax(s)).collect())
}

/// `η = Σ_s μ(s) v(s)`.
pub fn expected_return(mdp: &TabularMdp, v: &ValueTable) -> f64 {
    mdp.initial_dist().iter().zip(v.as_slice()).map(|(m, x)| m * x).sum()
}

/// Optimal Bellman operator `(𝒯v)(s) = max_a Q(s, a)`.
pub fn bellman_optimal(mdp: &TabularMdp, v: &ValueTable) -> Result<ValueTable> {
    Ok(q_from_v(mdp, v)?.max_values())
}

/// `‖𝒯v − v‖_∞`.
pub fn bellman_residual(mdp: &TabularMdp, v: &ValueTable) -> Result<f64> {
    Ok(bellman_optimal(mdp, v)?.sup_dist(v))
}

/// `‖v − (r_π + γ P_π v)‖_∞`.
pub fn policy_residual(mdp: &TabularMdp, policy: &Policy, v: &ValueTable) -> Result<f64> {
    policy.check(mdp.n_states(), mdp.n_actions())?;
    let (r_pi, p_pi) = policy_model(mdp, policy);
    Ok(evaluation_residual(mdp, &r_pi, &p_pi, v))
}

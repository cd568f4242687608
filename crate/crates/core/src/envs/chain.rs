use crate::error::{invalid, Result};
use crate::mdp::TabularMdp;

use super::spec::{EnvKind, EnvSpec};

pub const BACK: usize = 0;
pub const FORWARD: usize = 1;

/// RiverSwim-style chain of `n` states starting at the left end.
///
/// `BACK` always moves left and pays `backward_reward` when taken at the left
/// end. `FORWARD` moves right with probability `1 - slip` and left otherwise;
/// taking it at the right end pays `forward_reward_at_end`.
pub fn make_chain(n: usize, forward_reward_at_end: f64, backward_reward: f64, slip: f64) -> Result<EnvSpec> {
    if n < 2 {
        return Err(invalid("n", format!("chain needs at least 2 states, got {n}")));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(invalid("slip", format!("{slip} not in [0, 1)")));
    }
    Ok(EnvSpec {
        kind: EnvKind::Chain { n, end_reward: forward_reward_at_end, back_reward: backward_reward, slip },
        seed: 0,
        horizon: Some(20 * n),
    })
}

pub fn chain_mdp(n: usize, end_reward: f64, back_reward: f64, slip: f64, gamma: f64) -> Result<TabularMdp> {
    let na = 2;
    let mut p = vec![0.0; n * na * n];
    let mut r = vec![0.0; n * na];
    let idx = |s: usize, a: usize, next: usize| (s * na + a) * n + next;
    for s in 0..n {
        let left = s.saturating_sub(1);
        let right = (s + 1).min(n - 1);
        p[idx(s, BACK, left)] += 1.0;
        p[idx(s, FORWARD, right)] += 1.0 - slip;
        p[idx(s, FORWARD, left)] += slip;
        if s == 0 {
            r[s * na + BACK] = back_reward;
        }
        if s == n - 1 {
            r[s * na + FORWARD] = end_reward;
        }
    }
    let mut mu = vec![0.0; n];
    mu[0] = 1.0;
    TabularMdp::new(n, na, p, r, gamma, mu, vec![false; n])
}

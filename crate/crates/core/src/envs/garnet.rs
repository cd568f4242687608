use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::mdp::TabularMdp;

use super::spec::{EnvKind, EnvSpec};

/// Garnet random MDP: each `(s, a)` reaches `branching` distinct successors
/// with Dirichlet(1) weights; rewards are i.i.d. uniform on `[0, 1)`; the
/// initial distribution is uniform.
pub fn make_garnet(n_states: usize, n_actions: usize, branching: usize, seed: u64) -> Result<EnvSpec> {
    if n_states == 0 || n_actions == 0 {
        return Err(invalid("size", "garnet needs at least one state and one action"));
    }
    if branching == 0 || branching > n_states {
        return Err(invalid("branching", format!("{branching} not in [1, {n_states}]")));
    }
    Ok(EnvSpec { kind: EnvKind::Garnet { n_states, n_actions, branching }, seed, horizon: Some(100) })
}

pub fn garnet_mdp(n_states: usize, n_actions: usize, branching: usize, seed: u64, gamma: f64) -> Result<TabularMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; n_states * n_actions * n_states];
    let mut r = vec![0.0; n_states * n_actions];
    for sa in 0..n_states * n_actions {
        let mut succ = sample(&mut rng, n_states, branching).into_vec();
        succ.sort_unstable();
        // Dirichlet(1, ..., 1) via normalised unit exponentials
        let w: Vec<f64> = succ.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = w.iter().sum();
        let row = &mut p[sa * n_states..(sa + 1) * n_states];
        for (&next, wi) in succ.iter().zip(&w) {
            row[next] = wi / total;
        }
        r[sa] = rng.random();
    }
    let mu = vec![1.0 / n_states as f64; n_states];
    TabularMdp::new(n_states, n_actions, p, r, gamma, mu, vec![false; n_states])
}

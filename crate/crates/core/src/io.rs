//! Text serialization of [`TabularMdp`].
//!
//! The format is TOML:
//!
//! ```toml
//! n_states = 2
//! n_actions = 2
//! gamma = 9.0000000000000002e-1
//! initial_dist = [1.0000000000000000e0, 0.0000000000000000e0]
//! terminal = []
//! reward = [[0.0000000000000000e0, 0.0000000000000000e0], [1.0000000000000000e0, 1.0000000000000000e0]]
//! transition = [
//!   [0, 0, 0, 1.0000000000000000e0],
//!   ...
//! ]
//! ```
//!
//! `transition` lists the non-zero `(s, a, s', p)` entries; missing entries
//! are zero. Reals are written with 17 significant digits so a write/read
//! cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    reward: Vec<Vec<f64>>,
    transition: Vec<(usize, usize, usize, f64)>,
    initial_dist: Vec<f64>,
    #[serde(default)]
    terminal: Vec<usize>,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn mdp_to_string(mdp: &TabularMdp) -> String {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut out = String::new();
    let list = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(", ");
    let _ = writeln!(out, "n_states = {ns}");
    let _ = writeln!(out, "n_actions = {na}");
    let _ = writeln!(out, "gamma = {}", real(mdp.discount()));
    let _ = writeln!(out, "initial_dist = [{}]", list(&mut mdp.initial_dist().iter().map(|&x| real(x))));
    let terminals = (0..ns).filter(|&s| mdp.is_terminal(s)).map(|s| s.to_string());
    let _ = writeln!(out, "terminal = [{}]", list(&mut terminals.into_iter()));
    let _ = writeln!(out, "reward = [");
    for s in 0..ns {
        let row = (0..na).map(|a| real(mdp.reward(s, a)));
        let _ = writeln!(out, "  [{}],", list(&mut row.into_iter()));
    }
    let _ = writeln!(out, "]");
    let _ = writeln!(out, "transition = [");
    for s in 0..ns {
        for a in 0..na {
            for &(next, p) in mdp.successors(s, a) {
                let _ = writeln!(out, "  [{s}, {a}, {next}, {}],", real(p));
            }
        }
    }
    let _ = writeln!(out, "]");
    out
}

pub fn mdp_from_str(text: &str) -> Result<TabularMdp> {
    let file: MdpFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let (ns, na) = (file.n_states, file.n_actions);
    if file.reward.len() != ns || file.reward.iter().any(|row| row.len() != na) {
        return Err(Error::Parse(format!("`reward` must be {ns} rows of {na} entries")));
    }
    let mut p = vec![0.0; ns * na * ns];
    for &(s, a, next, prob) in &file.transition {
        if s >= ns || a >= na || next >= ns {
            return Err(Error::Parse(format!("transition entry ({s}, {a}, {next}) out of range")));
        }
        p[(s * na + a) * ns + next] += prob;
    }
    let mut terminal = vec![false; ns];
    for &s in &file.terminal {
        if s >= ns {
            return Err(Error::Parse(format!("terminal state {s} out of range")));
        }
        terminal[s] = true;
    }
    let reward = file.reward.into_iter().flatten().collect();
    TabularMdp::new(ns, na, p, reward, file.gamma, file.initial_dist, terminal)
}

pub fn read_mdp(path: impl AsRef<Path>) -> Result<TabularMdp> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    mdp_from_str(&text)
}

pub fn write_mdp(path: impl AsRef<Path>, mdp: &TabularMdp) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, mdp_to_string(mdp)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{garnet_mdp, grid_mdp, two_state};
    use proptest::prelude::*;

    #[test]
    fn reads_sparse_transitions_and_terminals() {
        let mdp = grid_mdp(2, 2, 0.1, 1.0, 0.01, 0.95).unwrap();
        let back = mdp_from_str(&mdp_to_string(&mdp)).unwrap();
        assert_eq!(back, mdp);
        assert!(back.is_terminal(3));
    }

    #[test]
    fn probabilities_have_many_digits() {
        let text = mdp_to_string(&two_state(0.9));
        assert!(text.contains("gamma = 9.0000000000000002e-1"), "{text}");
    }

    #[test]
    fn rejects_unknown_fields_and_bad_rows() {
        let text = mdp_to_string(&two_state(0.9)) + "colour = 3\n";
        assert!(mdp_from_str(&text).is_err());
        let text = mdp_to_string(&two_state(0.9)).replace("[0, 1, 1, 1.0000000000000000e0]", "[0, 1, 1, 0.5]");
        assert!(matches!(mdp_from_str(&text), Err(Error::InvalidMdp(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_lossless(seed in 0u64..10_000, ns in 1usize..8, na in 1usize..4, gamma in 0.01f64..0.999) {
            let b = 1 + (seed as usize % ns);
            let mdp = garnet_mdp(ns, na, b, seed, gamma).unwrap();
            prop_assert_eq!(mdp_from_str(&mdp_to_string(&mdp)).unwrap(), mdp);
        }
    }
}

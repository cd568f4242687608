use crate::error::{invalid, Result};
use crate::mdp::TabularMdp;

use super::spec::{EnvKind, EnvSpec};

pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;

/// Slippery gridworld. Start is the top-left cell, the goal (terminal) is
/// the bottom-right cell. Moves succeed with probability `1 - slip` and slip
/// to each perpendicular direction with `slip / 2`; bumping a wall stays put.
/// Entering the goal pays `goal_reward`, every other move costs `step_cost`.
pub fn make_gridworld(
    width: usize,
    height: usize,
    slip_prob: f64,
    goal_reward: f64,
    step_cost: f64,
    seed: u64,
) -> Result<EnvSpec> {
    if width == 0 || height == 0 || width * height < 2 {
        return Err(invalid("size", format!("{width}x{height} grid needs at least two cells")));
    }
    if !(0.0..1.0).contains(&slip_prob) {
        return Err(invalid("slip", format!("{slip_prob} not in [0, 1)")));
    }
    if !goal_reward.is_finite() || !step_cost.is_finite() {
        return Err(invalid("reward", "goal reward and step cost must be finite"));
    }
    Ok(EnvSpec {
        kind: EnvKind::Grid { width, height, slip: slip_prob, goal_reward, step_cost },
        seed,
        horizon: Some(4 * (width + height) * 5),
    })
}

fn moved(x: usize, y: usize, dir: usize, width: usize, height: usize) -> (usize, usize) {
    match dir {
        UP if y > 0 => (x, y - 1),
        RIGHT if x + 1 < width => (x + 1, y),
        DOWN if y + 1 < height => (x, y + 1),
        LEFT if x > 0 => (x - 1, y),
        _ => (x, y),
    }
}

pub fn grid_mdp(
    width: usize,
    height: usize,
    slip: f64,
    goal_reward: f64,
    step_cost: f64,
    gamma: f64,
) -> Result<TabularMdp> {
    let ns = width * height;
    let na = 4;
    let goal = ns - 1;
    let mut p = vec![0.0; ns * na * ns];
    let mut r = vec![0.0; ns * na];
    for y in 0..height {
        for x in 0..width {
            let s = y * width + x;
            for a in 0..na {
                let row = &mut p[(s * na + a) * ns..(s * na + a + 1) * ns];
                if s == goal {
                    row[s] = 1.0;
                    continue;
                }
                let lateral = [(a + 1) % 4, (a + 3) % 4];
                let outcomes = [(a, 1.0 - slip), (lateral[0], slip / 2.0), (lateral[1], slip / 2.0)];
                for (dir, prob) in outcomes {
                    if prob == 0.0 {
                        continue;
                    }
                    let (nx, ny) = moved(x, y, dir, width, height);
                    row[ny * width + nx] += prob;
                }
                r[s * na + a] = row
                    .iter()
                    .enumerate()
                    .map(|(next, &q)| q * if next == goal { goal_reward } else { -step_cost })
                    .sum();
            }
        }
    }
    let mut mu = vec![0.0; ns];
    mu[0] = 1.0;
    let mut terminal = vec![false; ns];
    terminal[goal] = true;
    TabularMdp::new(ns, na, p, r, gamma, mu, terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::value_iteration;

    #[test]
    fn one_by_two_pays_goal_on_entry() {
        let spec = make_gridworld(1, 2, 0.0, 1.0, 0.0, 0).unwrap();
        let mdp = spec.model(0.9).unwrap();
        let report = value_iteration(&mdp, 1e-12).unwrap();
        assert!((report.final_value[0] - 1.0).abs() < 1e-10);
        assert_eq!(report.final_value[1], 0.0);
    }

    #[test]
    fn no_slip_is_zero_one() {
        let mdp = grid_mdp(3, 3, 0.0, 1.0, 0.0, 0.9).unwrap();
        assert!(mdp.transitions().iter().all(|&p| p == 0.0 || p == 1.0));
        for s in 0..9 {
            for a in 0..4 {
                assert_eq!(mdp.successors(s, a).len(), 1);
            }
        }
    }

    #[test]
    fn slip_splits_laterally() {
        let mdp = grid_mdp(3, 3, 0.2, 1.0, 0.0, 0.9).unwrap();
        // centre cell 4 moving right: 0.8 -> 5, 0.1 -> 1 (up), 0.1 -> 7 (down)
        assert!((mdp.p(4, RIGHT, 5) - 0.8).abs() < 1e-15);
        assert!((mdp.p(4, RIGHT, 1) - 0.1).abs() < 1e-15);
        assert!((mdp.p(4, RIGHT, 7) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_gridworld(1, 1, 0.0, 1.0, 0.0, 0).is_err());
        assert!(make_gridworld(3, 3, 1.0, 1.0, 0.0, 0).is_err());
        assert_eq!(make_gridworld(4, 4, 0.1, 1.0, 0.0, 5), make_gridworld(4, 4, 0.1, 1.0, 0.0, 5));
    }
}

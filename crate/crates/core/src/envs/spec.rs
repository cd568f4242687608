//! Environment descriptors addressable by strings such as
//! `grid:5x5:slip=0.1:seed=3`, `chain:6`, `garnet:10x3x2:seed=7`,
//! `twostate`, `cartpole:bins=6` or `file:path/to/mdp.toml`.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::read_mdp;
use crate::mdp::TabularMdp;

use super::chain::{chain_mdp, make_chain};
use super::control::{make_discretized_control, CartPole, ControlTask, MountainCar};
use super::garnet::{garnet_mdp, make_garnet};
use super::grid::{grid_mdp, make_gridworld};
use super::{two_state, Environment, TabularEnv};

#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    TwoState,
    Grid { width: usize, height: usize, slip: f64, goal_reward: f64, step_cost: f64 },
    Chain { n: usize, end_reward: f64, back_reward: f64, slip: f64 },
    Garnet { n_states: usize, n_actions: usize, branching: usize },
    Control { task: ControlTask, bins: usize },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Generator seed for random models; otherwise only recorded.
    pub seed: u64,
    /// Episode time limit for the step interface.
    pub horizon: Option<usize>,
}

impl EnvSpec {
    pub fn two_state() -> Self {
        EnvSpec { kind: EnvKind::TwoState, seed: 0, horizon: Some(100) }
    }

    pub fn has_model(&self) -> bool {
        !matches!(self.kind, EnvKind::Control { .. })
    }

    /// Exact tabular model with discount `gamma`.
    pub fn model(&self, gamma: f64) -> Result<TabularMdp> {
        match &self.kind {
            EnvKind::TwoState => {
                let base = two_state(0.5);
                base.with_discount(gamma)
            }
            EnvKind::Grid { width, height, slip, goal_reward, step_cost } => {
                grid_mdp(*width, *height, *slip, *goal_reward, *step_cost, gamma)
            }
            EnvKind::Chain { n, end_reward, back_reward, slip } => {
                chain_mdp(*n, *end_reward, *back_reward, *slip, gamma)
            }
            EnvKind::Garnet { n_states, n_actions, branching } => {
                garnet_mdp(*n_states, *n_actions, *branching, self.seed, gamma)
            }
            EnvKind::Control { task, .. } => Err(Error::NoModel(task.name().to_string())),
            EnvKind::File(path) => read_mdp(path)?.with_discount(gamma),
        }
    }

    /// Step interface seeded with `seed`. `model` must be the result of
    /// [`model`](Self::model) for tabular kinds and is ignored otherwise.
    pub fn stepper(&self, model: Option<Arc<TabularMdp>>, rng: ChaCha8Rng) -> Result<Box<dyn Environment>> {
        match &self.kind {
            EnvKind::Control { task, bins } => {
                let horizon = self.horizon.unwrap_or(200);
                let seed = seed_from(rng);
                Ok(match task {
                    ControlTask::CartPole => Box::new(CartPole::new(*bins, horizon, seed)),
                    ControlTask::MountainCar => Box::new(MountainCar::new(*bins, horizon, seed)),
                })
            }
            _ => {
                let mdp = model.ok_or_else(|| Error::NoModel(self.to_string()))?;
                Ok(Box::new(TabularEnv::new(mdp, self.horizon, rng)))
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadEnvSpec { spec: text.to_string(), reason: reason.to_string() };
        if let Some(path) = text.strip_prefix("file:") {
            return Ok(EnvSpec { kind: EnvKind::File(PathBuf::from(path)), seed: 0, horizon: Some(200) });
        }
        let mut parts = text.split(':');
        let name = parts.next().unwrap_or_default();
        let mut positional = Vec::new();
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for part in parts {
            match part.split_once('=') {
                Some((k, v)) => keys.push((k, v)),
                None => positional.push(part),
            }
        }
        let float = |key: &str, default: f64| -> Result<f64> {
            match keys.iter().find(|(k, _)| *k == key) {
                Some((_, v)) => v.parse().map_err(|_| bad(&format!("`{key}` is not a number"))),
                None => Ok(default),
            }
        };
        let int = |key: &str| -> Result<Option<u64>> {
            match keys.iter().find(|(k, _)| *k == key) {
                Some((_, v)) => v.parse().map(Some).map_err(|_| bad(&format!("`{key}` is not an integer"))),
                None => Ok(None),
            }
        };
        let dims = |n: usize| -> Result<Vec<usize>> {
            let tok = positional.first().ok_or_else(|| bad("missing size"))?;
            let out: std::result::Result<Vec<usize>, _> = tok.split('x').map(str::parse).collect();
            let out = out.map_err(|_| bad("size must look like AxB"))?;
            if out.len() != n {
                return Err(bad(&format!("size needs {n} dimensions")));
            }
            Ok(out)
        };
        let allowed: &[&str] = match name {
            "twostate" => &["horizon"],
            "grid" => &["slip", "goal", "cost", "seed", "horizon"],
            "chain" => &["slip", "end", "back", "seed", "horizon"],
            "garnet" => &["seed", "horizon"],
            "cartpole" | "mountaincar" => &["bins", "seed", "horizon"],
            other => return Err(Error::UnknownEnv(other.to_string())),
        };
        if let Some((k, _)) = keys.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(bad(&format!("unknown key `{k}`")));
        }
        let seed = int("seed")?.unwrap_or(0);
        let mut spec = match name {
            "twostate" => EnvSpec::two_state(),
            "grid" => {
                let d = dims(2)?;
                make_gridworld(d[0], d[1], float("slip", 0.0)?, float("goal", 1.0)?, float("cost", 0.0)?, seed)?
            }
            "chain" => {
                let n = dims(1)?[0];
                let mut spec = make_chain(n, float("end", 1.0)?, float("back", 0.05)?, float("slip", 0.0)?)?;
                spec.seed = seed;
                spec
            }
            "garnet" => {
                let d = dims(3)?;
                make_garnet(d[0], d[1], d[2], seed)?
            }
            _ => {
                let bins = int("bins")?.unwrap_or(if name == "cartpole" { 6 } else { 12 });
                make_discretized_control(name, bins as usize, seed)?
            }
        };
        if let Some(h) = int("horizon")? {
            spec.horizon = Some(h as usize);
        }
        Ok(spec)
    }
}

fn seed_from(mut rng: ChaCha8Rng) -> u64 {
    use rand::RngCore;
    rng.next_u64()
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            EnvKind::TwoState => write!(f, "twostate")?,
            EnvKind::Grid { width, height, slip, goal_reward, step_cost } => write!(
                f,
                "grid:{width}x{height}:slip={slip}:goal={goal_reward}:cost={step_cost}:seed={}",
                self.seed
            )?,
            EnvKind::Chain { n, end_reward, back_reward, slip } => {
                write!(f, "chain:{n}:slip={slip}:end={end_reward}:back={back_reward}:seed={}", self.seed)?
            }
            EnvKind::Garnet { n_states, n_actions, branching } => {
                write!(f, "garnet:{n_states}x{n_actions}x{branching}:seed={}", self.seed)?
            }
            EnvKind::Control { task, bins } => write!(f, "{}:bins={bins}:seed={}", task.name(), self.seed)?,
            EnvKind::File(path) => return write!(f, "file:{}", path.display()),
        }
        if let Some(h) = self.horizon {
            write!(f, ":horizon={h}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for EnvSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EnvSpec::parse(s)
    }
}

//! Experiment configuration, read from TOML.
//!
//! ```toml
//! env = "grid:5x5:slip=0.1"
//! algo = "kpi-q"
//! gamma = 0.99
//! kappas = [0.0, 0.68, 1.0]
//! c_fa = [0.05]
//! total_samples = 200000
//! seeds = [0, 1, 2]
//!
//! [q]
//! alpha = 0.2
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use kdp_core::model_free::{PgHyper, QHyper};
use kdp_core::EnvSpec;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

pub const DEFAULT_KAPPAS: [f64; 7] = [0.0, 0.36, 0.68, 0.84, 0.92, 0.98, 1.0];
pub const DEFAULT_C_FA: [f64; 3] = [0.001, 0.05, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Vi,
    Pi,
    Kvi,
    Kpi,
    KpiQ,
    KviQ,
    KpiPg,
    KviPg,
    Gae,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Vi => "vi",
            Algo::Pi => "pi",
            Algo::Kvi => "kvi",
            Algo::Kpi => "kpi",
            Algo::KpiQ => "kpi-q",
            Algo::KviQ => "kvi-q",
            Algo::KpiPg => "kpi-pg",
            Algo::KviPg => "kvi-pg",
            Algo::Gae => "gae",
        }
    }

    /// Needs an exact model rather than samples.
    pub fn is_exact(self) -> bool {
        matches!(self, Algo::Vi | Algo::Pi | Algo::Kvi | Algo::Kpi)
    }

    pub fn uses_kappa(self) -> bool {
        !matches!(self, Algo::Vi | Algo::Pi)
    }

    /// Budget is counted in rollouts of `pg.rollout_len` steps.
    pub fn is_pg(self) -> bool {
        matches!(self, Algo::KpiPg | Algo::KviPg | Algo::Gae)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Environment string, see [`EnvSpec::parse`].
    pub env: String,
    pub algo: Algo,
    /// Discount used for scoring; also the training discount unless a
    /// study overrides it.
    pub gamma: f64,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    /// Replaces `κ_d` in every cell; the grid value then sets `κ_s`.
    #[serde(default)]
    pub kappa_d: Option<f64>,
    /// Replaces `κ_s` in every cell; the grid value then sets `κ_d`.
    #[serde(default)]
    pub kappa_s: Option<f64>,
    #[serde(default = "default_c_fa")]
    pub c_fa: Vec<f64>,
    /// Exact solvers only: run this many iterations instead of using `c_fa`.
    #[serde(default)]
    pub n_iterations: Option<u64>,
    /// Environment steps per run (model-free algorithms).
    #[serde(default)]
    pub total_samples: u64,
    /// One sample per iteration.
    #[serde(default)]
    pub naive: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    /// Solver tolerance for exact algorithms and scoring.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Draw a fresh random model (Garnet) per seed.
    #[serde(default)]
    pub resample_env: bool,
    /// Episodes per score when the environment has no model.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub q: QHyper,
    #[serde(default)]
    pub pg: PgHyper,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
}

fn default_kappas() -> Vec<f64> {
    DEFAULT_KAPPAS.to_vec()
}

fn default_c_fa() -> Vec<f64> {
    DEFAULT_C_FA.to_vec()
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_tol() -> f64 {
    1e-8
}

fn default_eval_episodes() -> usize {
    20
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("kdp-out")
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Defaults for everything but the environment, algorithm and discount.
    pub fn new(env: impl Into<String>, algo: Algo, gamma: f64) -> Self {
        Self {
            env: env.into(),
            algo,
            gamma,
            kappas: default_kappas(),
            kappa_d: None,
            kappa_s: None,
            c_fa: default_c_fa(),
            n_iterations: None,
            total_samples: 0,
            naive: false,
            seeds: default_seeds(),
            master_seed: 0,
            tol: default_tol(),
            resample_env: false,
            eval_episodes: default_eval_episodes(),
            q: QHyper::default(),
            pg: PgHyper::default(),
            output_dir: default_output_dir(),
            workers: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn env_spec(&self) -> Result<EnvSpec, HarnessError> {
        EnvSpec::parse(&self.env).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let spec = self.env_spec()?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(config_err(format!("gamma {} not in (0, 1)", self.gamma)));
        }
        check_unit_grid("kappas", &self.kappas)?;
        for (name, k) in [("kappa_d", self.kappa_d), ("kappa_s", self.kappa_s)] {
            if let Some(k) = k {
                check_unit_grid(name, &[k])?;
            }
        }
        if self.c_fa.is_empty() {
            return Err(config_err("c_fa grid is empty"));
        }
        if let Some(c) = self.c_fa.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
            return Err(config_err(format!("c_fa value {c} not in (0, 1)")));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seed list is empty"));
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(config_err("seeds must be distinct"));
        }
        if !(self.tol > 0.0) {
            return Err(config_err("tol must be positive"));
        }
        if self.algo.is_exact() {
            if !spec.has_model() {
                return Err(config_err(format!("{} needs a tabular model; `{}` has none", self.algo, self.env)));
            }
            if self.naive {
                return Err(config_err("the naive schedule applies to sample-based algorithms only"));
            }
            if self.n_iterations == Some(0) {
                return Err(config_err("n_iterations must be positive"));
            }
        } else {
            if self.total_samples == 0 {
                return Err(config_err(format!("{} needs total_samples > 0", self.algo)));
            }
            if self.n_iterations.is_some() {
                return Err(config_err("n_iterations applies to exact solvers only"));
            }
            if self.eval_episodes == 0 && !spec.has_model() {
                return Err(config_err("eval_episodes must be positive"));
            }
        }
        if self.algo.is_pg() && self.pg.rollout_len == 0 {
            return Err(config_err("pg.rollout_len must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn check_unit_grid(name: &str, grid: &[f64]) -> Result<(), HarnessError> {
    if grid.is_empty() {
        return Err(config_err(format!("{name} grid is empty")));
    }
    if let Some(k) = grid.iter().find(|k| !(0.0..=1.0).contains(*k)) {
        return Err(config_err(format!("{name} value {k} not in [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            env = "chain:6"
            algo = "kpi-q"
            gamma = 0.95
            total_samples = 1000
            "#,
        )
        .unwrap();
        assert_eq!(cfg.kappas, DEFAULT_KAPPAS);
        assert_eq!(cfg.c_fa, DEFAULT_C_FA);
        assert_eq!(cfg.seeds.len(), 10);
        assert_eq!(cfg.q, QHyper::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let top = "env = \"chain:6\"\nalgo = \"kpi\"\ngamma = 0.9\nkapas = [0.5]\n";
        assert!(matches!(ExperimentConfig::from_toml(top), Err(HarnessError::Config(_))));
        let nested = "env = \"chain:6\"\nalgo = \"kpi-q\"\ngamma = 0.9\ntotal_samples = 10\n[q]\nalpha2 = 0.1\n";
        assert!(matches!(ExperimentConfig::from_toml(nested), Err(HarnessError::Config(_))));
    }

    #[test]
    fn algo_names_round_trip() {
        for algo in [Algo::Vi, Algo::KpiQ, Algo::KviPg, Algo::Gae] {
            let text = format!("env = \"twostate\"\nalgo = \"{algo}\"\ngamma = 0.9\ntotal_samples = 5\n");
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap().algo, algo);
        }
    }

    #[test]
    fn bad_values_are_config_errors() {
        let base = ExperimentConfig { total_samples: 100, ..ExperimentConfig::new("chain:4", Algo::KpiQ, 0.9) };
        assert!(base.validate().is_ok());
        let cases = [
            ExperimentConfig { seeds: vec![1, 1], ..base.clone() },
            ExperimentConfig { seeds: vec![], ..base.clone() },
            ExperimentConfig { kappas: vec![], ..base.clone() },
            ExperimentConfig { kappas: vec![1.5], ..base.clone() },
            ExperimentConfig { c_fa: vec![1.0], ..base.clone() },
            ExperimentConfig { gamma: 1.0, ..base.clone() },
            ExperimentConfig { total_samples: 0, ..base.clone() },
            ExperimentConfig { env: "maze:3".into(), ..base.clone() },
            ExperimentConfig { algo: Algo::Kpi, naive: true, ..base.clone() },
            ExperimentConfig { env: "cartpole:bins=4".into(), algo: Algo::Vi, ..base.clone() },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))), "{cfg:?}");
        }
    }
}

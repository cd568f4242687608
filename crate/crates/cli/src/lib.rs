//! Experiment harness: κ-grid sweeps with seeded parallel runs, CSV logs and
//! 95% confidence intervals, plus the lowered-discount and split-κ studies.
//!
//! Outputs of [`run_experiment`] in `output_dir`:
//!
//! * `runs.csv`: logged points of every run (about 50 per run, plus the last);
//!   exact solvers log every iteration.
//! * `finals.csv`: one row per `(cell, seed)` with the final score.
//! * `summary.csv`: mean, sample standard deviation and `1.96·s/√n` per
//!   cell; `best` marks the top mean per algorithm, discount and rule.
//! * `failures.csv`: runs that could not be executed, if any.
//!
//! Scores are exact expected returns `Σ μ(s) V^π(s)` under the config
//! discount when the environment has a model, and mean undiscounted episode
//! returns otherwise.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod studies;
pub mod summary;

use thiserror::Error;

pub use config::{Algo, ExperimentConfig, DEFAULT_C_FA, DEFAULT_KAPPAS};
pub use experiment::{execute, standard_cells, Cell, CellFailure, FinalRow, Outcome, Rule, RunRow};
pub use studies::{run_gamma_ablation, run_kappa_split, GammaRow, SplitRow};
pub use summary::{CellSummary, RunSummary, Stats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("all {0} cells failed")]
    AllCellsFailed(usize),
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::AllCellsFailed(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

/// Runs the κ grid of `cfg` and writes its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    cfg.validate()?;
    let cells = standard_cells(cfg)?;
    run_cells(cfg, &cells)
}

pub(crate) fn run_cells(cfg: &ExperimentConfig, cells: &[Cell]) -> Result<RunSummary, HarnessError> {
    let out = execute(cfg, cells)?;
    let summary = RunSummary::from_outcome(&out);
    summary::write_outputs(&cfg.output_dir, &out, &summary)?;
    if summary.cells.is_empty() {
        return Err(HarnessError::AllCellsFailed(cells.len()));
    }
    Ok(summary)
}

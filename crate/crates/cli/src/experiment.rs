//! Cells, seeded runs and parallel execution.
//!
//! A cell is one point of a study grid: algorithm, training discount, κ and
//! iteration rule. Its descriptor string depends only on those values, and
//! every run seed is `derive_seed(master, descriptor, seed)`, so a cell's
//! results do not depend on which other cells share the config.

use std::collections::HashSet;
use std::sync::Arc;

use kdp_core::dp::{
    kappa_policy_iteration_with, kappa_value_iteration_with, policy_iteration_with, value_iteration,
    value_iteration_with, SolveOptions,
};
use kdp_core::model_free::{
    gae_mode, kpi_pg, kpi_q, kvi_pg, kvi_q, Evaluator, LogRow, PgHyper, RunSetup, TrainingLog,
};
use kdp_core::rng::{derive_seed, RunRngs};
use kdp_core::schedule::{make_split_schedule, naive_schedule, split_iterations_for_accuracy, KappaSchedule};
use kdp_core::{EnvSpec, KappaParams, TabularMdp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algo, ExperimentConfig};
use crate::HarnessError;

/// How a cell picks its iteration count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Accuracy(f64),
    Naive,
    Fixed(u64),
    /// Exact VI/PI run to tolerance.
    Converge,
}

impl Rule {
    pub fn label(&self) -> String {
        match self {
            Rule::Accuracy(c) => format!("cfa={c}"),
            Rule::Naive => "naive".into(),
            Rule::Fixed(n) => format!("n={n}"),
            Rule::Converge => "converge".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub algo: Algo,
    /// Discount the learner optimizes; scoring always uses the config's.
    pub train_gamma: f64,
    /// `None` for plain VI/PI.
    pub params: Option<KappaParams>,
    pub rule: Rule,
}

impl Cell {
    pub fn descriptor(&self, cfg: &ExperimentConfig) -> String {
        let (kd, ks) = match self.params {
            Some(p) => (p.kappa_d.to_string(), p.kappa_s.to_string()),
            None => ("-".into(), "-".into()),
        };
        format!(
            "env={}|algo={}|gamma={}|kd={kd}|ks={ks}|{}|T={}",
            cfg.env,
            self.algo,
            self.train_gamma,
            self.rule.label(),
            cfg.total_samples
        )
    }
}

fn params_for(cfg: &ExperimentConfig, kappa: f64) -> Result<KappaParams, HarnessError> {
    let kd = cfg.kappa_d.unwrap_or(kappa);
    let ks = cfg.kappa_s.unwrap_or(kappa);
    KappaParams::split(kd, ks).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Rules a κ-cell is run under.
pub(crate) fn rules(cfg: &ExperimentConfig) -> Vec<Rule> {
    if cfg.algo == Algo::Gae || cfg.naive {
        vec![Rule::Naive]
    } else if let Some(n) = cfg.n_iterations {
        vec![Rule::Fixed(n)]
    } else {
        cfg.c_fa.iter().map(|&c| Rule::Accuracy(c)).collect()
    }
}

/// Cells for the given training discount and κ values.
pub(crate) fn cells_for(
    cfg: &ExperimentConfig,
    train_gamma: f64,
    params: &[KappaParams],
) -> Vec<Cell> {
    if !cfg.algo.uses_kappa() {
        return vec![Cell { algo: cfg.algo, train_gamma, params: None, rule: Rule::Converge }];
    }
    let mut out = Vec::new();
    for &p in params {
        for rule in rules(cfg) {
            out.push(Cell { algo: cfg.algo, train_gamma, params: Some(p), rule });
        }
    }
    out
}

/// The κ-grid study of `cfg`, in grid order, without duplicates.
pub fn standard_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>, HarnessError> {
    let params = cfg.kappas.iter().map(|&k| params_for(cfg, k)).collect::<Result<Vec<_>, _>>()?;
    Ok(dedup(cfg, cells_for(cfg, cfg.gamma, &params)))
}

pub(crate) fn dedup(cfg: &ExperimentConfig, cells: Vec<Cell>) -> Vec<Cell> {
    let mut seen = HashSet::new();
    cells.into_iter().filter(|c| seen.insert(c.descriptor(cfg))).collect()
}

/// One logged point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub cell: String,
    pub seed: u64,
    pub iteration: u64,
    pub env_steps: u64,
    pub mean_return: Option<f64>,
    pub greedy_return: f64,
    pub sup_error: Option<f64>,
}

/// Final outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRow {
    pub cell: String,
    pub algo: String,
    pub gamma: f64,
    pub kappa_d: Option<f64>,
    pub kappa_s: Option<f64>,
    pub rule: String,
    pub seed: u64,
    pub run_seed: u64,
    pub n_iterations: u64,
    pub samples_per_iter: Option<u64>,
    pub final_return: f64,
    pub final_sup_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<RunRow>,
    pub final_row: FinalRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub seed: u64,
    pub error: String,
}

/// Everything a set of cells produced, in cell then seed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub cells: Vec<(Cell, String)>,
    pub rows: Vec<RunRow>,
    pub finals: Vec<FinalRow>,
    pub failures: Vec<CellFailure>,
}

impl Outcome {
    pub fn finals_of<'a>(&'a self, descriptor: &'a str) -> impl Iterator<Item = &'a FinalRow> + 'a {
        self.finals.iter().filter(move |f| f.cell == descriptor)
    }
}

/// Runs every `(cell, seed)` pair on a pool of `cfg.workers` threads. A cell
/// with any failed seed is dropped from `rows` and `finals`.
pub fn execute(cfg: &ExperimentConfig, cells: &[Cell]) -> Result<Outcome, HarnessError> {
    let spec = cfg.env_spec()?;
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let results: Vec<Result<RunOutput, String>> = pool.install(|| {
        jobs.par_iter().map(|&(c, seed)| run_one(cfg, &spec, &cells[c], seed).map_err(|e| e.to_string())).collect()
    });

    let mut out = Outcome::default();
    let mut failed = HashSet::new();
    for (&(c, seed), res) in jobs.iter().zip(&results) {
        if let Err(error) = res {
            failed.insert(c);
            out.failures.push(CellFailure { cell: cells[c].descriptor(cfg), seed, error: error.clone() });
        }
    }
    for (c, cell) in cells.iter().enumerate() {
        if !failed.contains(&c) {
            out.cells.push((cell.clone(), cell.descriptor(cfg)));
        }
    }
    for (&(c, _), res) in jobs.iter().zip(results) {
        if let (false, Ok(run)) = (failed.contains(&c), res) {
            out.rows.extend(run.rows);
            out.finals.push(run.final_row);
        }
    }
    Ok(out)
}

/// One seeded run of one cell.
pub fn run_one(cfg: &ExperimentConfig, spec: &EnvSpec, cell: &Cell, seed: u64) -> kdp_core::Result<RunOutput> {
    let descriptor = cell.descriptor(cfg);
    let run_seed = derive_seed(cfg.master_seed, &descriptor, seed);
    let mut spec = spec.clone();
    if cfg.resample_env {
        spec.seed = spec.seed.wrapping_add(seed);
    }
    let model = if spec.has_model() { Some(Arc::new(spec.model(cfg.gamma)?)) } else { None };

    let (logs, n_iterations, samples_per_iter) = if cell.algo.is_exact() {
        let model = model.expect("exact algorithms are validated to have a model");
        let (log, n) = solve_exact(cfg, &model, cell)?;
        (log, n, None)
    } else {
        let mut rngs = RunRngs::new(run_seed);
        let schedule = learner_schedule(cfg, cell)?;
        let (n, per) = (schedule.n_iterations, schedule.samples_per_iter);
        let setup = RunSetup::new(cell.train_gamma, cell.params.expect("learners take κ"), schedule)?;
        let mut env = spec.stepper(model.clone(), rngs.env.clone())?;
        let mut evaluator = match &model {
            Some(m) => Evaluator::exact(m.clone(), true)?,
            None => Evaluator::MonteCarlo {
                env: spec.stepper(None, rngs.eval.clone())?,
                episodes: cfg.eval_episodes,
                rng: rngs.eval.clone(),
                max_steps: spec.horizon.unwrap_or(200),
            },
        };
        let env = env.as_mut();
        let log = match cell.algo {
            Algo::KpiQ => kpi_q(env, setup, cfg.q.clone(), &mut rngs, &mut evaluator)?,
            Algo::KviQ => kvi_q(env, setup, cfg.q.clone(), &mut rngs, &mut evaluator)?,
            Algo::KpiPg => kpi_pg(env, setup, cfg.pg.clone(), &mut rngs, &mut evaluator)?,
            Algo::KviPg => kvi_pg(env, setup, cfg.pg.clone(), &mut rngs, &mut evaluator)?,
            Algo::Gae => {
                let lambda = cell.params.expect("gae takes λ").kappa_d;
                gae_mode(env, setup, lambda, cfg.pg.clone(), &mut rngs, &mut evaluator)?
            }
            _ => unreachable!("exact algorithms handled above"),
        };
        (log, n, Some(per))
    };

    let last = logs.rows.last().cloned().expect("every run logs its last iteration");
    let rows = logs
        .rows
        .into_iter()
        .map(|r| RunRow {
            cell: descriptor.clone(),
            seed,
            iteration: r.iteration,
            env_steps: r.env_steps,
            mean_return: r.mean_return,
            greedy_return: r.greedy_return,
            sup_error: r.sup_error,
        })
        .collect();
    let final_row = FinalRow {
        cell: descriptor,
        algo: cell.algo.name().into(),
        gamma: cell.train_gamma,
        kappa_d: cell.params.map(|p| p.kappa_d),
        kappa_s: cell.params.map(|p| p.kappa_s),
        rule: cell.rule.label(),
        seed,
        run_seed,
        n_iterations,
        samples_per_iter,
        final_return: last.greedy_return,
        final_sup_error: last.sup_error,
    };
    Ok(RunOutput { rows, final_row })
}

/// Budget in the learner's own unit: steps for Q-learning, rollouts for PG.
pub fn learner_schedule(cfg: &ExperimentConfig, cell: &Cell) -> kdp_core::Result<KappaSchedule> {
    let total = if cell.algo.is_pg() { cfg.total_samples / rollout_len(&cfg.pg) } else { cfg.total_samples };
    let params = cell.params.expect("learners take κ");
    match cell.rule {
        Rule::Naive => naive_schedule(cell.train_gamma, params, total),
        Rule::Accuracy(c) => make_split_schedule(cell.train_gamma, params, c, total),
        Rule::Fixed(n) => KappaSchedule::fixed(cell.train_gamma, params, n, total),
        Rule::Converge => unreachable!("learners always have an iteration rule"),
    }
}

fn rollout_len(pg: &PgHyper) -> u64 {
    pg.rollout_len as u64
}

/// Solves at the cell's discount; logs every iteration. Errors are measured
/// against the optimum of the training problem, returns under `cfg.gamma`.
fn solve_exact(cfg: &ExperimentConfig, model: &Arc<TabularMdp>, cell: &Cell) -> kdp_core::Result<(TrainingLog, u64)> {
    let train = model.with_discount(cell.train_gamma)?;
    let v_star = value_iteration(&train, cfg.tol * 1e-2)?.final_value;
    let opts = SolveOptions::new(cfg.tol).with_reference(v_star);
    let n = match cell.rule {
        Rule::Accuracy(c) => split_iterations_for_accuracy(cell.train_gamma, cell.params.expect("κ cell"), c) as usize,
        Rule::Fixed(n) => n as usize,
        _ => 0,
    };
    let report = match (cell.algo, cell.params) {
        (Algo::Vi, _) => value_iteration_with(&train, &opts)?,
        (Algo::Pi, _) => policy_iteration_with(&train, &opts)?,
        (Algo::Kvi, Some(p)) => kappa_value_iteration_with(&train, p, n, &opts)?,
        (Algo::Kpi, Some(p)) => kappa_policy_iteration_with(&train, p, n, &opts)?,
        _ => unreachable!("validated algorithm and κ combination"),
    };
    let mut rows: Vec<LogRow> = report
        .records()
        .map(|r| LogRow {
            iteration: r.iter as u64,
            env_steps: 0,
            mean_return: None,
            greedy_return: r.eta,
            sup_error: r.sup_error,
        })
        .collect();
    let mut scorer = Evaluator::exact(model.clone(), false)?;
    let (score, _) = scorer.evaluate(&report.final_policy)?;
    rows.last_mut().expect("initial record is always present").greedy_return = score;
    Ok((TrainingLog { rows, final_policy: report.final_policy }, report.iterations as u64))
}

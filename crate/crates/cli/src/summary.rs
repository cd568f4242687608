//! Per-cell statistics and CSV output.

use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::{Cell, Outcome};
use crate::HarnessError;

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// Mean, sample standard deviation and `1.96·s/√n` of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// `None` for fewer than two values.
    pub std: Option<f64>,
    pub half_width: Option<f64>,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (n > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Stats { n, mean, std, half_width: std.map(|s| Z95 * s / (n as f64).sqrt()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub algo: String,
    pub gamma: f64,
    pub kappa_d: Option<f64>,
    pub kappa_s: Option<f64>,
    pub rule: String,
    pub n: usize,
    pub mean: f64,
    pub std: Option<f64>,
    pub half_width: Option<f64>,
    /// Highest mean among cells sharing algorithm, discount and rule.
    pub best: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub cells: Vec<CellSummary>,
    pub failures: Vec<crate::experiment::CellFailure>,
}

impl RunSummary {
    pub fn from_outcome(out: &Outcome) -> Self {
        let mut cells: Vec<CellSummary> = out
            .cells
            .iter()
            .map(|(cell, desc)| summarize(cell, desc, out))
            .collect();
        mark_best(&mut cells);
        RunSummary { cells, failures: out.failures.clone() }
    }

    pub fn get(&self, descriptor: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell == descriptor)
    }

    /// κ of the best cell per `(algo, gamma, rule)` group.
    pub fn best_kappas(&self) -> Vec<&CellSummary> {
        self.cells.iter().filter(|c| c.best).collect()
    }
}

fn summarize(cell: &Cell, desc: &str, out: &Outcome) -> CellSummary {
    let finals: Vec<f64> = out.finals_of(desc).map(|f| f.final_return).collect();
    let st = Stats::of(&finals);
    CellSummary {
        cell: desc.to_string(),
        algo: cell.algo.name().into(),
        gamma: cell.train_gamma,
        kappa_d: cell.params.map(|p| p.kappa_d),
        kappa_s: cell.params.map(|p| p.kappa_s),
        rule: cell.rule.label(),
        n: st.n,
        mean: st.mean,
        std: st.std,
        half_width: st.half_width,
        best: false,
    }
}

fn mark_best(cells: &mut [CellSummary]) {
    for i in 0..cells.len() {
        let key = |c: &CellSummary| (c.algo.clone(), c.gamma.to_bits(), c.rule.clone());
        let k = key(&cells[i]);
        let top = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| key(c) == k)
            .max_by(|(ia, a), (ib, b)| a.mean.total_cmp(&b.mean).then(ib.cmp(ia)))
            .map(|(j, _)| j);
        cells[i].best = top == Some(i);
    }
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Writes `runs.csv`, `finals.csv`, `summary.csv` and, when any run failed,
/// `failures.csv`.
pub fn write_outputs(dir: &Path, out: &Outcome, summary: &RunSummary) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_rows(&dir.join("runs.csv"), &out.rows)?;
    write_rows(&dir.join("finals.csv"), &out.finals)?;
    write_rows(&dir.join("summary.csv"), &summary.cells)?;
    let failures = dir.join("failures.csv");
    if summary.failures.is_empty() {
        if failures.exists() {
            fs::remove_file(&failures).map_err(|e| io_err(&failures, e))?;
        }
    } else {
        write_rows(&failures, &summary.failures)?;
    }
    Ok(())
}

/// Plain-text table for the terminal.
pub fn render(summary: &RunSummary) -> String {
    let fmt_opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    let mut s = format!(
        "{:<7} {:>7} {:>6} {:>6} {:<11} {:>3} {:>12} {:>10}\n",
        "algo", "gamma", "kd", "ks", "rule", "n", "mean", "±95%"
    );
    for c in &summary.cells {
        s += &format!(
            "{:<7} {:>7} {:>6} {:>6} {:<11} {:>3} {:>12.4} {:>10}{}\n",
            c.algo,
            c.gamma,
            c.kappa_d.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            c.kappa_s.map(|k| k.to_string()).unwrap_or_else(|| "-".into()),
            c.rule,
            c.n,
            c.mean,
            fmt_opt(c.half_width),
            if c.best { "  *" } else { "" }
        );
    }
    for f in &summary.failures {
        s += &format!("failed: {} seed {}: {}\n", f.cell, f.seed, f.error);
    }
    s
}

//! Studies built on top of the κ grid: lowering the discount instead of
//! using κ, and separating κ's discounting and shaping roles.

use std::path::Path;

use kdp_core::KappaParams;
use serde::{Deserialize, Serialize};

use crate::config::{check_unit_grid, ExperimentConfig};
use crate::experiment::{cells_for, dedup, standard_cells, Cell};
use crate::summary::{write_rows, RunSummary};
use crate::{run_cells, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    /// `kappa` rows vary κ at the config discount; `gamma` rows run κ = 1
    /// at a lowered training discount.
    pub study: String,
    pub gamma: f64,
    pub kappa: Option<f64>,
    pub rule: String,
    pub n: usize,
    pub mean: f64,
    pub half_width: Option<f64>,
    pub cell: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    /// `discount` sweeps κ_d at each fixed κ_s; `shaping` sweeps κ_s at each
    /// fixed κ_d.
    pub design: String,
    pub fixed: f64,
    pub varied: f64,
    pub kappa_d: f64,
    pub kappa_s: f64,
    pub rule: String,
    pub n: usize,
    pub mean: f64,
    pub half_width: Option<f64>,
    pub cell: String,
}

/// The κ grid at `cfg.gamma` next to κ = 1 trained at each discount of
/// `gammas`; all scored under `cfg.gamma`. Writes `gamma_ablation.csv`.
pub fn run_gamma_ablation(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<(RunSummary, Vec<GammaRow>), HarnessError> {
    cfg.validate()?;
    if gammas.is_empty() {
        return Err(HarnessError::Config("gamma grid is empty".into()));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
        return Err(HarnessError::Config(format!("gamma value {g} not in (0, 1)")));
    }
    let kappa_cells = standard_cells(cfg)?;
    let one = [KappaParams::standard(1.0).expect("1 is a valid κ")];
    let gamma_cells: Vec<Cell> = gammas.iter().flat_map(|&g| cells_for(cfg, g, &one)).collect();
    let all = dedup(cfg, kappa_cells.iter().chain(&gamma_cells).cloned().collect());
    let summary = run_cells(cfg, &all)?;

    let row = |study: &str, cell: &Cell| {
        let desc = cell.descriptor(cfg);
        summary.get(&desc).map(|s| GammaRow {
            study: study.into(),
            gamma: cell.train_gamma,
            kappa: cell.params.map(|p| p.kappa_s),
            rule: s.rule.clone(),
            n: s.n,
            mean: s.mean,
            half_width: s.half_width,
            cell: desc,
        })
    };
    let rows: Vec<GammaRow> = kappa_cells
        .iter()
        .filter_map(|c| row("kappa", c))
        .chain(gamma_cells.iter().filter_map(|c| row("gamma", c)))
        .collect();
    write_rows(&cfg.output_dir.join("gamma_ablation.csv"), &rows)?;
    Ok((summary, rows))
}

/// Every `(κ_d, κ_s)` pair of the two grids, reported twice: once as κ_d
/// sweeps per fixed κ_s and once as κ_s sweeps per fixed κ_d. Writes
/// `kappa_split.csv`.
pub fn run_kappa_split(
    cfg: &ExperimentConfig,
    kd_grid: &[f64],
    ks_grid: &[f64],
) -> Result<(RunSummary, Vec<SplitRow>), HarnessError> {
    cfg.validate()?;
    check_unit_grid("kd", kd_grid)?;
    check_unit_grid("ks", ks_grid)?;
    if !cfg.algo.uses_kappa() {
        return Err(HarnessError::Config(format!("{} has no κ to split", cfg.algo)));
    }
    if cfg.kappa_d.is_some() || cfg.kappa_s.is_some() {
        return Err(HarnessError::Config("kappa_d/kappa_s overrides conflict with the split grids".into()));
    }
    let split = |kd: f64, ks: f64| KappaParams::split(kd, ks).expect("grids checked above");
    let pairs: Vec<KappaParams> = kd_grid.iter().flat_map(|&kd| ks_grid.iter().map(move |&ks| split(kd, ks))).collect();
    let cells = dedup(cfg, cells_for(cfg, cfg.gamma, &pairs));
    let summary = run_cells(cfg, &cells)?;

    let mut rows = Vec::new();
    let mut emit = |design: &str, fixed: f64, varied: f64, params: KappaParams| {
        for cell in cells_for(cfg, cfg.gamma, &[params]) {
            let desc = cell.descriptor(cfg);
            if let Some(s) = summary.get(&desc) {
                rows.push(SplitRow {
                    design: design.into(),
                    fixed,
                    varied,
                    kappa_d: params.kappa_d,
                    kappa_s: params.kappa_s,
                    rule: s.rule.clone(),
                    n: s.n,
                    mean: s.mean,
                    half_width: s.half_width,
                    cell: desc,
                });
            }
        }
    };
    for &ks in ks_grid {
        for &kd in kd_grid {
            emit("discount", ks, kd, split(kd, ks));
        }
    }
    for &kd in kd_grid {
        for &ks in ks_grid {
            emit("shaping", kd, ks, split(kd, ks));
        }
    }
    write_rows(&cfg.output_dir.join("kappa_split.csv"), &rows)?;
    Ok((summary, rows))
}

/// Reads back a study table written by this module.
pub fn read_table<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    crate::summary::read_rows(path)
}

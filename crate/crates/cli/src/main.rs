use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdp_core::dp::{
    kappa_policy_iteration_with, kappa_value_iteration_with, policy_iteration_with, value_iteration,
    value_iteration_with, SolveOptions,
};
use kdp_core::schedule::{make_schedule, naive_schedule, split_iterations_for_accuracy};
use kdp_core::KappaParams;
use kdp_harness::summary::render;
use kdp_harness::{
    execute, run_experiment, run_gamma_ablation, run_kappa_split, standard_cells, Algo, ExperimentConfig,
    HarnessError,
};

#[derive(Parser)]
#[command(name = "kdp", version, about = "κ-greedy dynamic programming and tabular RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one environment with one algorithm and print the per-iteration log as CSV.
    Solve(SolveArgs),
    /// Run the κ grid of a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print iteration counts and per-iteration budgets for a κ grid.
    Schedule {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        cfa: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        kappa_grid: Vec<f64>,
        #[arg(long)]
        total: u64,
    },
    /// Cross κ_d and κ_s grids and report both sweep designs.
    Split {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        kd_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        ks_grid: Vec<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Compare the κ grid with κ = 1 trained at lowered discounts.
    Gamma {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_grid: Vec<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    env: String,
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Split mode: overrides the discount role of κ.
    #[arg(long)]
    kappa_d: Option<f64>,
    /// Split mode: overrides the shaping role of κ.
    #[arg(long)]
    kappa_s: Option<f64>,
    #[arg(long, conflicts_with_all = ["n_iters", "naive"])]
    cfa: Option<f64>,
    #[arg(long, conflicts_with = "naive")]
    n_iters: Option<u64>,
    /// One sample per iteration; with exact solvers, `--total` iterations.
    #[arg(long)]
    naive: bool,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Sample budget (model-free) or naive iteration count (exact).
    #[arg(long)]
    total: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Solve(args) => solve(args),
        Command::Run { config, output_dir } => {
            let cfg = load(config, output_dir)?;
            let summary = run_experiment(&cfg)?;
            print!("{}", render(&summary));
            Ok(())
        }
        Command::Schedule { gamma, cfa, kappa_grid, total } => schedule(gamma, cfa, &kappa_grid, total),
        Command::Split { config, kd_grid, ks_grid, output_dir } => {
            let cfg = load(config, output_dir)?;
            let (summary, _) = run_kappa_split(&cfg, &kd_grid, &ks_grid)?;
            print!("{}", render(&summary));
            Ok(())
        }
        Command::Gamma { config, gamma_grid, output_dir } => {
            let cfg = load(config, output_dir)?;
            let (summary, _) = run_gamma_ablation(&cfg, &gamma_grid)?;
            print!("{}", render(&summary));
            Ok(())
        }
    }
}

fn load(path: PathBuf, output_dir: Option<PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    Ok(cfg)
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn solve(args: SolveArgs) -> Result<(), HarnessError> {
    let params = KappaParams::split(args.kappa_d.unwrap_or(args.kappa), args.kappa_s.unwrap_or(args.kappa))
        .map_err(config_err)?;
    if !args.algo.is_exact() {
        return solve_model_free(args, params);
    }
    let mut cfg = ExperimentConfig::new(args.env.clone(), args.algo, args.gamma);
    cfg.tol = args.tol;
    cfg.validate()?;
    let mdp = cfg.env_spec()?.model(args.gamma).map_err(config_err)?;
    let v_star = value_iteration(&mdp, args.tol * 1e-2).map_err(config_err)?.final_value;
    let opts = SolveOptions::new(args.tol).with_reference(v_star);
    let n = match (args.cfa, args.n_iters, args.naive, args.total) {
        (Some(c), ..) => split_iterations_for_accuracy(args.gamma, params, c),
        (_, Some(n), ..) => n,
        (_, _, true, Some(t)) => t,
        (_, _, true, None) => return Err(config_err("--naive with an exact solver needs --total")),
        _ => 0,
    } as usize;
    let needs_n = matches!(args.algo, Algo::Kvi | Algo::Kpi);
    if needs_n && n == 0 {
        return Err(config_err("kvi/kpi need one of --cfa, --n-iters or --naive --total"));
    }
    let report = match args.algo {
        Algo::Vi => value_iteration_with(&mdp, &opts),
        Algo::Pi => policy_iteration_with(&mdp, &opts),
        Algo::Kvi => kappa_value_iteration_with(&mdp, params, n, &opts),
        Algo::Kpi => kappa_policy_iteration_with(&mdp, params, n, &opts),
        _ => unreachable!(),
    }
    .map_err(config_err)?;
    let mut stdout = std::io::stdout().lock();
    report.write_csv(&mut stdout).map_err(|e| HarnessError::Io(e.to_string()))?;
    stdout.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    eprintln!("iterations: {}  stopped early: {}", report.iterations, report.stopped_early);
    eprintln!("policy: {:?}", report.final_policy);
    Ok(())
}

fn solve_model_free(args: SolveArgs, params: KappaParams) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::new(args.env.clone(), args.algo, args.gamma);
    cfg.tol = args.tol;
    cfg.kappas = vec![params.kappa_d];
    cfg.kappa_s = Some(params.kappa_s);
    cfg.total_samples = args.total.ok_or_else(|| config_err("model-free algorithms need --total"))?;
    cfg.seeds = vec![args.seed];
    cfg.naive = args.naive;
    cfg.n_iterations = None;
    match (args.cfa, args.n_iters) {
        (Some(c), _) => cfg.c_fa = vec![c],
        (_, Some(_)) => return Err(config_err("--n-iters applies to exact solvers; use --cfa or --naive")),
        _ if !args.naive && args.algo != Algo::Gae => return Err(config_err("need --cfa or --naive")),
        _ => {}
    }
    cfg.validate()?;
    let cells = standard_cells(&cfg)?;
    let out = execute(&cfg, &cells)?;
    if let Some(f) = out.failures.first() {
        return Err(HarnessError::AllCellsFailed(cells.len())).inspect_err(|_| eprintln!("kdp: {}", f.error));
    }
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for row in &out.rows {
        w.serialize(row).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
    if let Some(f) = out.finals.first() {
        eprintln!("final return: {}  iterations: {}", f.final_return, f.n_iterations);
    }
    Ok(())
}

fn schedule(gamma: f64, cfa: f64, grid: &[f64], total: u64) -> Result<(), HarnessError> {
    println!("kappa,xi,n_iterations,samples_per_iter,remainder,naive_iterations");
    for &k in grid {
        let s = make_schedule(gamma, k, cfa, total).map_err(config_err)?;
        let naive = naive_schedule(gamma, s.params, total).map_err(config_err)?;
        println!("{k},{},{},{},{},{}", s.xi, s.n_iterations, s.samples_per_iter, s.remainder, naive.n_iterations);
    }
    Ok(())
}

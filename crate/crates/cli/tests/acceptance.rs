//! Acceptance suite. Each test prints one `PASS`/`FAIL` line (written past
//! the test harness's output capture) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;

use kdp_core::dp::{
    kappa_policy_iteration, kappa_policy_iteration_with, kappa_value_iteration, kappa_value_iteration_with,
    policy_iteration_with, value_iteration, value_iteration_with, SolveOptions,
};
use kdp_core::envs::{garnet_mdp, make_chain, make_gridworld, two_state, TabularEnv};
use kdp_core::eval::{policy_evaluation_exact, q_from_v};
use kdp_core::kappa::{kappa_bellman, kappa_q, KappaParams};
use kdp_core::model_free::{
    advantage_identity_check, kappa_returns, policy_gradient, q_evaluation_step, q_improvement_step, rollout,
    surrogate_objective, QLearnerState, Transition,
};
use kdp_core::schedule::{contraction_rate, iterations_for_accuracy};
use kdp_core::{Policy, QTable, TabularMdp, ValueTable};
use kdp_harness::summary::read_rows;
use kdp_harness::{run_experiment, Algo, CellSummary, ExperimentConfig, FinalRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KAPPA_GRID: [f64; 5] = [0.0, 0.36, 0.68, 0.92, 1.0];
const CONTRACTION_SLACK: f64 = 1e-9;
const SOLVER_TOL: f64 = 1e-10;
const FIXED_POINT_TOL: f64 = 1e-8;
const ORACLE_TOL: f64 = 1e-3;
const IDENTITY_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-6;
const SUMMARY_TOL: f64 = 1e-12;

fn verdict(id: u32, name: &str, ok: bool, detail: impl AsRef<str>) {
    let line = format!("{} criterion {id} ({name}): {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").expect("stdout");
    out.flush().expect("stdout");
    assert!(ok, "{line}");
}

fn k(x: f64) -> KappaParams {
    KappaParams::standard(x).unwrap()
}

/// 50 Garnet models with 2..=30 states.
fn garnet_suite() -> Vec<TabularMdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50)
        .map(|i| {
            let ns = rng.random_range(2..=30);
            let na = rng.random_range(1..=4);
            let b = rng.random_range(1..=ns.min(5));
            let gamma = rng.random_range(0.5..0.95);
            garnet_mdp(ns, na, b, 1000 + i, gamma).unwrap()
        })
        .collect()
}

fn random_values(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ValueTable {
    ValueTable((0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

#[test]
fn criterion_1_schedule_reproduction() {
    let high = iterations_for_accuracy(0.99, 0.99, 0.1);
    let mid = iterations_for_accuracy(0.99, 0.5, 0.1);
    verdict(
        1,
        "schedule reproduction",
        high == 4 && mid == 115,
        format!("N(0.99, κ=0.99, 0.1) = {high} (want 4), N(0.99, κ=0.5, 0.1) = {mid} (want 115)"),
    );
}

#[test]
fn criterion_2_contraction_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_curve = f64::NEG_INFINITY;
    for mdp in garnet_suite() {
        let ns = mdp.n_states();
        let scale = mdp.v_max().max(1.0);
        let v_star = value_iteration(&mdp, 1e-13).unwrap().final_value;
        for kappa in KAPPA_GRID {
            let xi = contraction_rate(mdp.discount(), kappa);
            for _ in 0..20 {
                let v1 = random_values(&mut rng, ns, scale);
                let v2 = random_values(&mut rng, ns, scale);
                let t1 = kappa_bellman(&mdp, &v1, k(kappa), 1e-13).unwrap();
                let t2 = kappa_bellman(&mdp, &v2, k(kappa), 1e-13).unwrap();
                let factor = t1.sup_dist(&t2) / v1.sup_dist(&v2);
                worst_excess = worst_excess.max(factor - xi);
            }
            let opts = SolveOptions::new(SOLVER_TOL).with_reference(v_star.clone());
            let report = kappa_value_iteration_with(&mdp, k(kappa), 60, &opts).unwrap();
            let e0 = report.initial.sup_error.unwrap();
            for r in &report.per_iteration {
                let bound = xi.powi(r.iter as i32) * e0 + 10.0 * SOLVER_TOL;
                worst_curve = worst_curve.max(r.sup_error.unwrap() - bound);
            }
        }
    }
    verdict(
        2,
        "contraction suite",
        worst_excess <= CONTRACTION_SLACK && worst_curve <= 0.0,
        format!("max(factor − ξ) = {worst_excess:.3e}, max(error − bound) = {worst_curve:.3e}"),
    );
}

#[test]
fn criterion_3_fixed_point_and_reductions() {
    let mut worst_fixed = 0.0_f64;
    let mut vi_match = true;
    let mut pi_match = true;
    let mut worst_one = 0.0_f64;
    for mdp in garnet_suite() {
        let v_star = value_iteration(&mdp, 1e-13).unwrap().final_value;
        for kappa in KAPPA_GRID {
            let tv = kappa_bellman(&mdp, &v_star, k(kappa), 1e-13).unwrap();
            worst_fixed = worst_fixed.max(tv.sup_dist(&v_star));
        }

        let opts = SolveOptions::new(SOLVER_TOL).with_trace();
        let vi = value_iteration_with(&mdp, &opts).unwrap();
        let kvi = kappa_value_iteration_with(&mdp, k(0.0), vi.iterations, &opts).unwrap();
        vi_match &= kvi.values == vi.values;
        let pi = policy_iteration_with(&mdp, &opts).unwrap();
        let kpi = kappa_policy_iteration_with(&mdp, k(0.0), pi.iterations.max(1), &opts).unwrap();
        pi_match &= kpi.values == pi.values && kpi.policies == pi.policies;

        let one_pi = kappa_policy_iteration(&mdp, k(1.0), 1, SOLVER_TOL).unwrap().final_value;
        let one_vi = kappa_value_iteration(&mdp, k(1.0), 1, SOLVER_TOL).unwrap().final_value;
        worst_one = worst_one.max(one_pi.sup_dist(&v_star)).max(one_vi.sup_dist(&v_star));
    }
    verdict(
        3,
        "fixed point and reductions",
        worst_fixed <= FIXED_POINT_TOL && vi_match && pi_match && worst_one <= 10.0 * SOLVER_TOL,
        format!(
            "max ‖T_κV* − V*‖ = {worst_fixed:.3e}, κ=0 VI bit-match = {vi_match}, κ=0 PI bit-match = {pi_match}, \
             κ=1 one-iteration error = {worst_one:.3e}"
        ),
    );
}

/// One transition per `(s, a)` of a deterministic model.
fn sweep(mdp: &TabularMdp) -> Vec<Transition> {
    let mut out = Vec::new();
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let &[(next, _)] = mdp.successors(s, a) else { panic!("model is not deterministic") };
            out.push(Transition { s, a, r: mdp.reward(s, a), s_next: next, terminal: mdp.is_terminal(next), truncated: false });
        }
    }
    out
}

#[test]
fn criterion_4_model_free_oracles() {
    let models = [
        ("twostate", two_state(0.9)),
        ("chain(3)", make_chain(3, 1.0, 0.05, 0.0).unwrap().model(0.9).unwrap()),
        ("grid(3x3)", make_gridworld(3, 3, 0.0, 1.0, 0.01, 0).unwrap().model(0.9).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_surrogate = 0.0_f64;
    let mut worst_td = 0.0_f64;
    for (_, mdp) in &models {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let batch = sweep(mdp);
        let v_phi = mdp.zero_terminals(&random_values(&mut rng, ns, 5.0));
        for kappa in [0.0, 0.5, 1.0] {
            let exact = kappa_q(mdp, &v_phi, k(kappa), 1e-12).unwrap();
            let mut st = QLearnerState::new(ns, na, 0.5, 1);
            st.q_phi = QTable::broadcast(&v_phi, na);
            for _ in 0..3000 {
                q_improvement_step(&mut st, &batch, mdp.discount(), k(kappa));
            }
            worst_surrogate = worst_surrogate.max(st.q_theta.sup_dist(&exact));
        }
        for _ in 0..5 {
            let pi = Policy::Deterministic((0..ns).map(|_| rng.random_range(0..na)).collect());
            let q_pi = q_from_v(mdp, &policy_evaluation_exact(mdp, &pi, 1e-12).unwrap()).unwrap();
            let mut st = QLearnerState::new(ns, na, 0.5, 1);
            for _ in 0..3000 {
                q_evaluation_step(&mut st, &batch, mdp.discount(), &pi);
            }
            worst_td = worst_td.max(st.q_phi.sup_dist(&q_pi));
        }
    }
    verdict(
        4,
        "model-free oracle equivalence",
        worst_surrogate <= ORACLE_TOL && worst_td <= ORACLE_TOL,
        format!("surrogate sup error = {worst_surrogate:.3e}, TD(0) sup error = {worst_td:.3e}"),
    );
}

#[test]
fn criterion_5_gae_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0_f64;
    let mut episodes = 0;
    for kappa in [0.0, 0.3, 0.7, 1.0] {
        for _ in 0..1000 {
            let ns = rng.random_range(2..12);
            let v = random_values(&mut rng, ns, 10.0);
            let gamma = rng.random_range(0.5..0.999);
            let len = rng.random_range(1..60);
            let mut s = rng.random_range(0..ns);
            let traj: Vec<Transition> = (0..len)
                .map(|j| {
                    let s_next = rng.random_range(0..ns);
                    let t = Transition {
                        s,
                        a: rng.random_range(0..4),
                        r: rng.random_range(-1.0..1.0),
                        s_next,
                        terminal: j + 1 == len,
                        truncated: false,
                    };
                    s = s_next;
                    t
                })
                .collect();
            worst = worst.max(advantage_identity_check(&traj, &v, gamma, kappa));
            episodes += 1;
        }
    }
    verdict(5, "GAE identity", worst <= IDENTITY_TOL, format!("max gap over {episodes} episodes = {worst:.3e}"));
}

#[test]
fn criterion_6_gradient_check() {
    let mdp = std::sync::Arc::new(make_chain(3, 1.0, 0.05, 0.2).unwrap().model(0.9).unwrap());
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut env = TabularEnv::seeded(mdp.clone(), Some(20), 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_rel = 0.0_f64;
    for _ in 0..20 {
        let logits: Vec<f64> = (0..ns * na).map(|_| rng.random_range(-2.0..2.0)).collect();
        let traj = rollout(&mut env, &logits, 30, &mut rng);
        let v_phi = random_values(&mut rng, ns, 3.0);
        let v_theta = random_values(&mut rng, ns, 3.0);
        let adv: Vec<f64> = kappa_returns(&traj, &v_phi, 0.9, k(0.5))
            .iter()
            .zip(&traj)
            .map(|((ret, _), t)| ret - v_theta[t.s])
            .collect();
        let coef = 0.01;
        let g = policy_gradient(&logits, na, &traj, &adv, coef);
        let h = 1e-5;
        let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
        for i in 0..logits.len() {
            let (mut up, mut down) = (logits.clone(), logits.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (surrogate_objective(&up, na, &traj, &adv, coef) - surrogate_objective(&down, na, &traj, &adv, coef))
                / (2.0 * h);
            diff = diff.max((fd - g[i]).abs());
            scale = scale.max(fd.abs());
        }
        worst_rel = worst_rel.max(diff / scale);
    }
    verdict(6, "gradient check", worst_rel <= GRADIENT_REL_TOL, format!("max relative gap = {worst_rel:.3e}"));
}

/// Recomputes every summary row from `finals.csv`; returns the largest gap.
fn recompute_gap(dir: &Path) -> f64 {
    let finals: Vec<FinalRow> = read_rows(&dir.join("finals.csv")).unwrap();
    let summary: Vec<CellSummary> = read_rows(&dir.join("summary.csv")).unwrap();
    let mut by_cell: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for f in &finals {
        by_cell.entry(&f.cell).or_default().push(f.final_return);
    }
    let mut gap = 0.0_f64;
    for row in &summary {
        let xs = &by_cell[row.cell.as_str()];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let half = 1.96 * std / n.sqrt();
        assert_eq!(row.n, xs.len());
        gap = gap.max((row.mean - mean).abs()).max((row.std.unwrap() - std).abs()).max((row.half_width.unwrap() - half).abs());
    }
    gap
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn criterion_7_kappa_tradeoff_study() {
    let tmp = tempfile::tempdir().unwrap();
    let mut deterministic = true;
    let mut gap = 0.0_f64;
    let mut report = Vec::new();
    for env in ["grid:5x5:slip=0.1", "chain:6"] {
        for algo in [Algo::KpiQ, Algo::KpiPg] {
            let mut cfg = ExperimentConfig::new(env, algo, 0.99);
            cfg.c_fa = vec![0.05];
            cfg.total_samples = 200_000;
            cfg.master_seed = 7;
            let tag = format!("{}-{algo}", env.split(':').next().unwrap());
            cfg.output_dir = tmp.path().join(&tag);
            let summary = run_experiment(&cfg).unwrap();
            let first = (read(&cfg.output_dir.join("runs.csv")), read(&cfg.output_dir.join("finals.csv")));
            gap = gap.max(recompute_gap(&cfg.output_dir));

            cfg.output_dir = tmp.path().join(format!("{tag}-again"));
            run_experiment(&cfg).unwrap();
            let second = (read(&cfg.output_dir.join("runs.csv")), read(&cfg.output_dir.join("finals.csv")));
            deterministic &= first == second;

            let best = summary.best_kappas()[0];
            let cells: Vec<String> = summary
                .cells
                .iter()
                .map(|c| format!("κ={}: {:.4}±{:.4}", c.kappa_d.unwrap(), c.mean, c.half_width.unwrap()))
                .collect();
            report.push(format!("{tag} best κ={} [{}]", best.kappa_d.unwrap(), cells.join(", ")));
        }
    }
    for line in &report {
        let mut out = std::io::stdout().lock();
        writeln!(out, "  criterion 7 study: {line}").unwrap();
    }
    verdict(
        7,
        "κ trade-off study",
        deterministic && gap <= SUMMARY_TOL,
        format!("repeat runs bit-identical = {deterministic}, max summary recomputation gap = {gap:.3e}"),
    );
}

fn kdp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kdp")).args(args).output().expect("kdp binary runs")
}

fn write_config(path: &Path, cfg: &ExperimentConfig) {
    std::fs::write(path, toml::to_string(cfg).unwrap()).unwrap();
}

/// Lines of `csv` whose first field is `cell`.
fn lines_of<'a>(csv: &'a str, cell: &str) -> Vec<&'a str> {
    csv.lines().filter(|l| l.starts_with(&format!("{cell},"))).collect()
}

#[test]
fn criterion_8_naive_and_lowered_gamma_studies() {
    let tmp = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut tables = 0;
    for algo in [Algo::KpiQ, Algo::KpiPg] {
        let mut cfg = ExperimentConfig::new("grid:5x5:slip=0.1", algo, 0.99);
        cfg.total_samples = 100_000;
        cfg.seeds = (0..5).collect();
        cfg.master_seed = 8;

        // C_FA ablation plus the naive column, as two tables.
        for naive in [false, true] {
            cfg.naive = naive;
            cfg.output_dir = tmp.path().join(format!("{algo}-naive{naive}"));
            let path = tmp.path().join(format!("{algo}-naive{naive}.toml"));
            write_config(&path, &cfg);
            let out = kdp(&["run", path.to_str().unwrap()]);
            if !out.status.success() {
                problems.push(format!("{algo} naive={naive}: exit {:?}", out.status.code()));
                continue;
            }
            let rows: Vec<CellSummary> = read_rows(&cfg.output_dir.join("summary.csv")).unwrap();
            let want = cfg.kappas.len() * if naive { 1 } else { cfg.c_fa.len() };
            if rows.len() != want || rows.iter().any(|r| r.n != cfg.seeds.len()) {
                problems.push(format!("{algo} naive={naive}: {} summary rows, want {want}", rows.len()));
            }
            tables += 1;
        }

        // Lowered discount next to the κ grid.
        cfg.naive = false;
        cfg.c_fa = vec![0.05];
        cfg.output_dir = tmp.path().join(format!("{algo}-gamma"));
        let path = tmp.path().join(format!("{algo}-gamma.toml"));
        write_config(&path, &cfg);
        let out = kdp(&["gamma", path.to_str().unwrap(), "--gamma-grid", "0.9,0.95,0.98"]);
        if out.status.success() {
            let table = read(&cfg.output_dir.join("gamma_ablation.csv"));
            let want = 1 + cfg.kappas.len() + 3;
            if table.lines().count() != want {
                problems.push(format!("{algo} gamma table has {} lines, want {want}", table.lines().count()));
            }
            tables += 1;
        } else {
            problems.push(format!("{algo} gamma study: exit {:?}", out.status.code()));
        }

        // Cell isolation: one cell alone reproduces its rows bit for bit.
        let full_runs = read(&cfg.output_dir.join("runs.csv"));
        let full_finals = read(&cfg.output_dir.join("finals.csv"));
        let mut alone = cfg.clone();
        alone.kappas = vec![0.68];
        alone.output_dir = tmp.path().join(format!("{algo}-alone"));
        run_experiment(&alone).unwrap();
        let cell = kdp_harness::standard_cells(&alone).unwrap()[0].descriptor(&alone);
        let alone_runs = read(&alone.output_dir.join("runs.csv"));
        let alone_finals = read(&alone.output_dir.join("finals.csv"));
        let same = lines_of(&full_runs, &cell) == lines_of(&alone_runs, &cell)
            && lines_of(&full_finals, &cell) == lines_of(&alone_finals, &cell)
            && lines_of(&alone_runs, &cell).len() + 1 == alone_runs.lines().count()
            && !lines_of(&alone_runs, &cell).is_empty();
        if !same {
            problems.push(format!("{algo}: isolated cell differs"));
        }
    }
    verdict(
        8,
        "naive and lowered-γ studies",
        problems.is_empty(),
        if problems.is_empty() {
            format!("{tables} tables written, isolated cells bit-identical")
        } else {
            problems.join("; ")
        },
    );
}

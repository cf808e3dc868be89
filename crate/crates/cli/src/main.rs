//! `qhmm`: seeded experiment runner and invariant checker.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::{
    config_hash, load, ConfigError, HardnessConfig, LearnConfig, PlanConfig, ProtocolConfig, SpandimConfig, VerifyConfig,
};
use output::{num, CsvOut};
use qhmm::env::{episode_rng, UniformPolicy};
use qhmm::hardness::{
    bandit_pair, biased_trivial_povm, empirical_kl_check, lock_emission, lock_fixture, projective_grid, sic_orbit,
    sic_tetrahedron, sigma_min, SicPovm,
};
use qhmm::learner::{run_omle, OmleConfig};
use qhmm::linalg::DensityOperator;
use qhmm::oom::{build_recovery_maps, kappa_uc, spanning_dimension};
use qhmm::planner::{backward_value_iteration, ActionGrid};
use qhmm::verify::{run_all, VerifyInput};
use qhmm::workx::{build_case_study, dissipation_series, protocol_expected_work, protocol_monte_carlo, DissipationRow};
use qhmm::QhmmError;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "qhmm", version, about = "Learning and work extraction on quantum hidden Markov environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for CSV output.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suites.
    Verify(Common),
    /// Optimistic learning on the work-extraction case study.
    Learn(Common),
    /// Finite-M extraction protocol, exact and sampled.
    Protocol(Common),
    /// Export the value-iteration table.
    Plan(Common),
    /// Divergence check for the bandit pair and the lock summary.
    Hardness(Common),
    /// Spanning dimension of a named measurement family.
    Spandim(Common),
}

enum Failure {
    Config(ConfigError),
    Invariant(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<QhmmError> for Failure {
    fn from(e: QhmmError) -> Self {
        Failure::Invariant(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invariant(format!("i/o: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Verify(c) => ("verify", c),
        Command::Learn(c) => ("learn", c),
        Command::Protocol(c) => ("protocol", c),
        Command::Plan(c) => ("plan", c),
        Command::Hardness(c) => ("hardness", c),
        Command::Spandim(c) => ("spandim", c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("config error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match &cli.command {
        Command::Verify(c) => cmd_verify(c),
        Command::Learn(c) => cmd_learn(c),
        Command::Protocol(c) => cmd_protocol(c),
        Command::Plan(c) => cmd_plan(c),
        Command::Hardness(c) => cmd_hardness(c),
        Command::Spandim(c) => cmd_spandim(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{name}: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("{name}: {msg}");
            ExitCode::from(1)
        }
    }
}

fn strings<const N: usize>(xs: [&str; N]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn cmd_verify(c: &Common) -> Outcome {
    let cfg: VerifyConfig = load(c.config.as_deref())?;
    let sic = match &cfg.sic_fixture {
        None => sic_tetrahedron(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("sic_fixture {}: {e}", p.display())))?;
            serde_json::from_str::<SicPovm>(&text).map_err(|e| ConfigError(format!("sic_fixture {}: {e}", p.display())))?
        }
    };
    let results = run_all(&VerifyInput { seed: c.seed, sic });
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        println!("{:width$}  {}  {}", r.name, if r.passed { "pass" } else { "FAIL" }, r.detail);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(format!("failed suites: {}", failed.join(", "))))
    }
}

/// Mean and 95% normal interval half-width.
fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn cmd_learn(c: &Common) -> Outcome {
    let cfg: LearnConfig = load(c.config.as_deref())?;
    let hash = config_hash(&cfg);
    let mut header = strings(["episode"]);
    for l in &cfg.horizons {
        for col in ["mean", "ci95_low", "ci95_high", "entropy_form_mean", "random_mean"] {
            header.push(format!("L{l}_{col}"));
        }
    }
    let mut per_l: Vec<Vec<Vec<DissipationRow>>> = Vec::new();
    let mut runs = CsvOut::create(
        &c.out,
        "learn_runs.csv",
        "learn",
        &hash,
        c.seed,
        &strings(["horizon", "run_seed", "v_star", "final_theta_hat", "cum_dissipation"]),
    )?;
    for &l in &cfg.horizons {
        let (env, fam) = build_case_study(cfg.theta, l, &cfg.case_study).map_err(|e| Failure::Config(ConfigError(format!("case_study (L = {l}): {e}"))))?;
        let results: Vec<Result<_, QhmmError>> = (0..cfg.seeds as u64)
            .into_par_iter()
            .map(|i| {
                let seed = c.seed.wrapping_add(i);
                let oc = OmleConfig { episodes: cfg.episodes, delta: cfg.delta, c: cfg.c, seed, grid_points: cfg.grid_points };
                let run = run_omle(&fam, &env, Some(&[cfg.theta]), &oc)?;
                let rows = dissipation_series(&run.logs, &fam, cfg.theta)?;
                Ok((seed, run, rows))
            })
            .collect();
        let mut series = Vec::new();
        for r in results {
            let (seed, run, rows) = r?;
            let last = rows.last().map_or(f64::NAN, |x| x.value_form);
            let est = run.final_estimate.as_ref().map_or(f64::NAN, |v| v[0]);
            runs.row(&[l.to_string(), seed.to_string(), num(run.v_star), num(est), num(last)])?;
            series.push(rows);
        }
        per_l.push(series);
    }
    runs.finish()?;
    let mut out = CsvOut::create(&c.out, "learn.csv", "learn", &hash, c.seed, &header)?;
    for k in 0..cfg.episodes {
        let mut row = vec![(k + 1).to_string()];
        for series in &per_l {
            let v: Vec<f64> = series.iter().map(|s| s[k].value_form).collect();
            let e: Vec<f64> = series.iter().map(|s| s[k].entropy_form).collect();
            let r: Vec<f64> = series.iter().map(|s| s[k].random_baseline).collect();
            let (m, h) = mean_ci(&v);
            row.extend([num(m), num(m - h), num(m + h), num(mean_ci(&e).0), num(mean_ci(&r).0)]);
        }
        out.row(&row)?;
    }
    let path = out.finish()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_protocol(c: &Common) -> Outcome {
    let cfg: ProtocolConfig = load(c.config.as_deref())?;
    let hash = config_hash(&cfg);
    let ctx = |e: QhmmError| Failure::Config(ConfigError(format!("states: {e}")));
    let rho = DensityOperator::from_bloch(cfg.rho).map_err(ctx)?;
    let target = DensityOperator::from_bloch(cfg.target).map_err(ctx)?;
    let ideal = qhmm::workx::expected_work_arbitrary(&rho, &target, cfg.inv_temperature);
    let mut out = CsvOut::create(
        &c.out,
        "protocol.csv",
        "protocol",
        &hash,
        c.seed,
        &strings(["M", "ideal", "exact_mean", "exact_bias", "mc_mean", "mc_std", "mc_stderr", "mc_bias"]),
    )?;
    for &m in &cfg.m_values {
        let exact = protocol_expected_work(&rho, &target, m, cfg.inv_temperature, cfg.eps)?;
        let mc = protocol_monte_carlo(&rho, &target, m, cfg.inv_temperature, cfg.samples, c.seed, cfg.eps)?;
        out.row(&[m.to_string(), num(ideal), num(exact), num(exact - ideal), num(mc.mean), num(mc.std), num(mc.stderr), num(mc.mean - ideal)])?;
    }
    println!("wrote {}", out.finish()?.display());
    Ok(())
}

fn cmd_plan(c: &Common) -> Outcome {
    let cfg: PlanConfig = load(c.config.as_deref())?;
    let hash = config_hash(&cfg);
    let cs = &cfg.case_study;
    let model = cs.model(cfg.theta).map_err(|e| Failure::Config(ConfigError(format!("case_study: {e}"))))?;
    let grid = ActionGrid::new(&model, cs.n_belief, cs.n_angle, cs.eps).map_err(|e| Failure::Config(ConfigError(format!("case_study: {e}"))))?;
    let table = backward_value_iteration(&model, &grid, cfg.horizon);
    let mut out = CsvOut::create(
        &c.out,
        "plan.csv",
        "plan",
        &hash,
        c.seed,
        &strings(["step", "belief_index", "belief_state0", "value", "angle_index", "angle", "purity"]),
    )?;
    for t in 0..cfg.horizon {
        for (i, &b) in grid.beliefs().iter().enumerate() {
            let k = table.policy[t][i];
            out.row(&[
                (t + 1).to_string(),
                i.to_string(),
                num(b),
                num(table.values[t][i]),
                k.to_string(),
                num(grid.angles()[k]),
                num(grid.lambda(i, k)),
            ])?;
        }
    }
    if grid.dropped_angles() > 0 {
        println!("{} angle(s) with singular observation matrix left out", grid.dropped_angles());
    }
    println!("wrote {}", out.finish()?.display());
    Ok(())
}

fn cmd_hardness(c: &Common) -> Outcome {
    let cfg: HardnessConfig = load(c.config.as_deref())?;
    let hash = config_hash(&cfg);
    let delta = cfg.delta.unwrap_or_else(|| (3.0 / (8.0 * cfg.rounds as f64)).sqrt().min(1.0 / 6.0));
    let pair = bandit_pair(delta, cfg.alternative)?;
    let reports: Vec<_> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| empirical_kl_check(&pair, &UniformPolicy::over(4), cfg.rounds, &mut episode_rng(c.seed, r)))
        .collect::<Result<_, _>>()?;
    let mut out = CsvOut::create(
        &c.out,
        "hardness_kl.csv",
        "hardness",
        &hash,
        c.seed,
        &strings([
            "run", "delta", "rounds", "pulls0", "pulls1", "pulls2", "pulls3", "decomposed_exact", "decomposed_estimate", "slack", "bound", "passed",
        ]),
    )?;
    for (r, rep) in reports.iter().enumerate() {
        let mut row = vec![r.to_string(), num(delta), rep.rounds.to_string()];
        row.extend(rep.pulls.iter().map(|p| p.to_string()));
        row.extend([num(rep.decomposed_exact), num(rep.decomposed_estimate), num(rep.slack), num(rep.bound), rep.passed.to_string()]);
        out.row(&row)?;
    }
    println!("wrote {}", out.finish()?.display());

    let lock = lock_fixture(cfg.lock_alpha)?;
    let kappa = kappa_uc(&build_recovery_maps(&lock)?);
    let (_, v) = lock.plan_exhaustive()?;
    let lock_path = c.out.join("lock_h3_a2.json");
    std::fs::write(&lock_path, lock.to_json()?)?;
    println!(
        "lock (illustration, H = 3, A = 2): α = {}, σ_min(O) = {:.6}, κ_uc = {:.6}, optimal value = {:.6}; wrote {}",
        cfg.lock_alpha,
        sigma_min(&lock_emission(cfg.lock_alpha)),
        kappa,
        v,
        lock_path.display()
    );
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("divergence bound held in {}/{} runs (Δ = {delta:.6}, bound {:.6})", cfg.runs - failed, cfg.runs, reports[0].bound);
    if failed > 0 {
        return Err(Failure::Invariant(format!("divergence bound exceeded in {failed} run(s)")));
    }
    Ok(())
}

fn cmd_spandim(c: &Common) -> Outcome {
    let cfg: SpandimConfig = load(c.config.as_deref())?;
    let hash = config_hash(&cfg);
    let family = match cfg.preset.as_str() {
        "qubit-projective-grid" => projective_grid(cfg.size),
        "projective-plus-biased" => {
            let mut g = projective_grid(cfg.size - 1);
            g.push(biased_trivial_povm(0.3)?);
            g
        }
        _ => sic_orbit(cfg.size, &mut episode_rng(c.seed, 0))?,
    };
    let d = spanning_dimension(&family)?;
    println!("{d}");
    let mut out = CsvOut::create(&c.out, "spandim.csv", "spandim", &hash, c.seed, &strings(["preset", "size", "spanning_dimension"]))?;
    out.row(&[cfg.preset.clone(), cfg.size.to_string(), d.to_string()])?;
    out.finish()?;
    Ok(())
}

//! Command-line driver: run field simulations, the two-phase splitting
//! benchmark, and convergence studies from TOML configurations, writing
//! CSV tables and a JSON manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result, bail};
use clap::{Args, Parser, Subcommand};

use geoheat::integrators::{Scheme, StepperConfig};
use geoheat::operator::{LinearOperator, OperatorBuilder, OperatorRole};
use geoheat::scenarios::{
    ConvergenceStudy, ErrorReport, TwoPhaseBenchmark, convergence_study, run_layered_scenario,
    run_two_phase_comparison,
};
use geoheat::splitting::{SplitConfig, SplitScheme};
use geoheat_cli::config::{self, RunConfig, ScenarioKind, parse_config};
use geoheat_cli::output;

/// Environment variable overriding the output root directory.
const OUT_ROOT_ENV: &str = "GEOHEAT_OUT";

#[derive(Parser)]
#[command(
    name = "geoheat",
    version,
    about = "Multiphase transport in layered porous media"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a configuration file.
    Simulate(SimulateArgs),
    /// Built-in benchmarks.
    #[command(subcommand)]
    Benchmark(BenchmarkCommand),
    /// Order-verification studies.
    #[command(subcommand)]
    Study(StudyCommand),
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to the TOML configuration.
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent sweep points.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Comma-separated snapshot steps, overriding the configuration.
    #[arg(long, value_delimiter = ',')]
    snapshot_steps: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum BenchmarkCommand {
    /// Mobile/immobile two-phase splitting benchmark against the dense
    /// matrix-exponential reference.
    TwoPhase(TwoPhaseArgs),
}

#[derive(Args)]
struct TwoPhaseArgs {
    /// Spatial points per block.
    #[arg(long, default_value_t = 50)]
    size: usize,
    /// Splitting step size.
    #[arg(long, default_value_t = 20.0)]
    tau: f64,
    /// Largest iteration count.
    #[arg(long, default_value_t = 6)]
    kmax: usize,
    /// Outer steps to march.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, default_value = "out/two_phase")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Observed-order study over a halving step-size grid.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Path to the TOML configuration (scenario = "convergence").
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Benchmark(BenchmarkCommand::TwoPhase(args)) => benchmark_two_phase(args),
        Command::Study(StudyCommand::Convergence(args)) => study_convergence(args),
    }
}

fn resolve_out_dir(flag: Option<&Path>, configured: &str) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(configured),
        None => PathBuf::from(configured),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let mut config = parse_config(&args.config)?;
    if let Some(steps) = args.snapshot_steps {
        config.output.snapshot_steps = steps;
    }
    let dir = resolve_out_dir(args.out.as_deref(), &config.output.dir);
    output::ensure_dir(&dir)?;

    match config.scenario {
        ScenarioKind::Layered | ScenarioKind::Custom => {
            let scenario = config.build_layered()?;
            let run = run_layered_scenario(&scenario).context("simulation failed")?;
            let mut outputs = vec![output::write_series(&dir, &run)?];
            for (step, state) in &run.snapshots {
                outputs.push(output::write_snapshot(&dir, *step, state, &scenario.grid)?);
            }
            let diagnostics = serde_json::json!({
                "tau": run.tau,
                "budget": {
                    "injected": run.budget.injected,
                    "outflow": run.budget.outflow,
                    "decay_loss": run.budget.decay_loss,
                    "final_total": run.budget.final_total,
                    "relative_residual": run.budget.relative_residual(),
                },
            });
            let manifest = output::write_manifest(
                &dir,
                &config,
                started.elapsed().as_secs_f64(),
                &outputs,
                diagnostics,
            )?;
            println!(
                "wrote {} outputs to {} (manifest {})",
                outputs.len() + 1,
                dir.display(),
                manifest.display()
            );
        }
        ScenarioKind::TwoPhase => {
            let bench = config.build_two_phase();
            let report = run_two_phase_comparison(&bench).context("benchmark failed")?;
            write_benchmark_outputs(&dir, &config, &report, started)?;
        }
        ScenarioKind::Convergence => {
            let reports = run_convergence(&config, args.jobs)?;
            let outputs = vec![output::write_errors(&dir, &reports)?];
            output::write_manifest(
                &dir,
                &config,
                started.elapsed().as_secs_f64(),
                &outputs,
                orders_json(&reports),
            )?;
            println!("wrote convergence study to {}", dir.display());
        }
    }
    Ok(())
}

fn write_benchmark_outputs(
    dir: &Path,
    config: &RunConfig,
    report: &ErrorReport,
    started: Instant,
) -> Result<()> {
    let outputs = vec![output::write_errors(dir, std::slice::from_ref(report))?];
    let diagnostics = serde_json::json!({
        "reference_check": report.reference_check,
        "iterative_monotone": report.iterative_monotone,
        "one_side_b_beats_a": report.side_b_beats_side_a,
    });
    output::write_manifest(
        dir,
        config,
        started.elapsed().as_secs_f64(),
        &outputs,
        diagnostics,
    )?;
    println!(
        "benchmark: iterative monotone = {:?}, one-side B beats A = {:?} ({})",
        report.iterative_monotone,
        report.side_b_beats_side_a,
        dir.display()
    );
    Ok(())
}

fn benchmark_two_phase(args: TwoPhaseArgs) -> Result<()> {
    let started = Instant::now();
    let bench = TwoPhaseBenchmark {
        points: args.size,
        tau: args.tau,
        k_max: args.kmax,
        n_steps: args.steps,
        ..TwoPhaseBenchmark::default()
    };
    let config = RunConfig {
        scenario: ScenarioKind::TwoPhase,
        grid: None,
        params: None,
        velocity: None,
        layers: Vec::new(),
        sources: Vec::new(),
        split: None,
        march: None,
        two_phase: Some(config::TwoPhaseConfig {
            points: bench.points,
            diffusion: bench.diffusion,
            velocity: bench.velocity,
            dx: bench.dx,
            lambda1: bench.lambda1,
            lambda2: bench.lambda2,
            exchange: bench.exchange,
            tau: bench.tau,
            k_max: bench.k_max,
            n_steps: bench.n_steps,
            inner_nodes: bench.inner_nodes,
        }),
        convergence: None,
        output: config::OutputConfig {
            dir: args.out.display().to_string(),
            snapshot_steps: Vec::new(),
        },
    };
    let violations = config.validate();
    if !violations.is_empty() {
        bail!(
            "invalid benchmark parameters:\n  - {}",
            violations.join("\n  - ")
        );
    }
    let dir = resolve_out_dir(None, &config.output.dir);
    output::ensure_dir(&dir)?;
    let report = run_two_phase_comparison(&bench).context("benchmark failed")?;
    write_benchmark_outputs(&dir, &config, &report, started)
}

fn study_convergence(args: ConvergenceArgs) -> Result<()> {
    let started = Instant::now();
    let config = parse_config(&args.config)?;
    if config.scenario != ScenarioKind::Convergence {
        bail!("study convergence expects scenario = \"convergence\"");
    }
    let dir = resolve_out_dir(args.out.as_deref(), &config.output.dir);
    output::ensure_dir(&dir)?;
    let reports = run_convergence(&config, args.jobs)?;
    let outputs = vec![output::write_errors(&dir, &reports)?];
    output::write_manifest(
        &dir,
        &config,
        started.elapsed().as_secs_f64(),
        &outputs,
        orders_json(&reports),
    )?;
    for report in &reports {
        let label = report
            .rows
            .first()
            .map(|r| format!("{} (k={})", r.scheme, r.k.unwrap_or(0)))
            .unwrap_or_default();
        match &report.order {
            Some(fit) => println!("{label}: observed order {:.3}", fit.slope),
            None => println!("{label}: errors not monotone, no order fit"),
        }
    }
    println!("wrote {}", dir.join("errors.csv").display());
    Ok(())
}

fn orders_json(reports: &[ErrorReport]) -> serde_json::Value {
    serde_json::json!({
        "orders": reports
            .iter()
            .map(|r| {
                serde_json::json!({
                    "scheme": r.rows.first().map(|row| row.scheme.clone()),
                    "iterations": r.rows.first().and_then(|row| row.k),
                    "slope": r.order.as_ref().map(|o| o.slope),
                })
            })
            .collect::<Vec<_>>(),
    })
}

/// Fixed stable noncommuting operator pair for the convergence study.
fn study_system(
    seed: u64,
) -> (
    LinearOperator,
    LinearOperator,
    geoheat::nalgebra::DVector<f64>,
) {
    let mut state = seed;
    let mut rand = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64)
    };
    let n = 8;
    let mut a = OperatorBuilder::new(n, OperatorRole::Stiffness);
    let mut b = OperatorBuilder::new(n, OperatorRole::Reaction);
    for i in 0..n {
        for j in 0..n {
            let va = rand() - 0.5;
            let vb = rand() - 0.5;
            a.add(i, j, if i == j { va - 3.0 } else { 0.5 * va });
            b.add(i, j, if i == j { vb - 2.0 } else { 0.4 * vb });
        }
    }
    let c0 = geoheat::nalgebra::DVector::from_fn(n, |_, _| rand());
    (a.build(), b.build(), c0)
}

fn run_convergence(config: &RunConfig, jobs: usize) -> Result<Vec<ErrorReport>> {
    let conv = config.convergence.as_ref().expect("validated");
    let (a1, a2, c0) = study_system(conv.seed);
    let study = ConvergenceStudy {
        a1,
        a2,
        initial: c0,
        t_end: conv.t_end,
    };
    let taus: Vec<f64> = (0..conv.levels)
        .map(|l| conv.tau_max / f64::powi(2.0, l as i32))
        .collect();

    // sweep points: the unsplit reference plus the iterative scheme at each
    // configured iteration count
    let mut points: Vec<SplitConfig> = vec![SplitConfig {
        scheme: SplitScheme::Unsplit,
        tau: conv.tau_max,
        inner: StepperConfig::new(Scheme::ImplicitTrapezoidal, conv.tau_max),
        ..SplitConfig::default()
    }];
    for &q in &conv.iterations {
        points.push(SplitConfig {
            scheme: SplitScheme::Iterative,
            iterations: q,
            tau: conv.tau_max,
            inner: StepperConfig::new(Scheme::ImplicitTrapezoidal, conv.tau_max),
            ..SplitConfig::default()
        });
    }

    let jobs = jobs.clamp(1, points.len());
    let mut reports: Vec<Option<ErrorReport>> = vec![None; points.len()];
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for worker in 0..jobs {
            let study = &study;
            let taus = &taus;
            let points = &points;
            handles.push(scope.spawn(move || -> Result<Vec<(usize, ErrorReport)>> {
                let mut done = Vec::new();
                for idx in (worker..points.len()).step_by(jobs) {
                    let report =
                        convergence_study(study, &points[idx], taus).map_err(anyhow::Error::new)?;
                    done.push((idx, report));
                }
                Ok(done)
            }));
        }
        for handle in handles {
            for (idx, report) in handle.join().expect("worker panicked")? {
                reports[idx] = Some(report);
            }
        }
        Ok(())
    })?;
    Ok(reports.into_iter().map(|r| r.expect("computed")).collect())
}

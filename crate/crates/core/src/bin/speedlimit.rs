use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use speedlimit::bounds::{applicable_bounds, evaluate_bound_with, BoundOptions, BoundReport};
use speedlimit::check::run_check;
use speedlimit::config::{RunConfig, ScenarioKind};
use speedlimit::current::{accumulate_actions, trajectory_rates};
use speedlimit::langevin::{propagate_moments, MomentTrajectory};
use speedlimit::output::{bounds_jsonl, fig1_csv, trajectory_csv, write_atomic};
use speedlimit::scenarios::{figure1_sweep, rlc_experiment, TrapProtocol};
use speedlimit::svg::fig1_svg;
use speedlimit::Error;

#[derive(Parser)]
#[command(name = "speedlimit", version, about = "Speed limits and entropy bounds for linear Langevin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and Monte Carlo paths.
    #[arg(long)]
    threads: Option<usize>,
    /// Report entropy-like values in J/K instead of units of k_B.
    #[arg(long)]
    si: bool,
    /// Seed for the Monte Carlo oracle.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate moments and write the trajectory table.
    Simulate(Common),
    /// Evaluate bounds and write JSON-lines reports.
    Bounds(Common),
    /// Transition-time sweep over γ/m, CSV plus SVG.
    Fig1(Common),
    /// RLC experiment with the control-effort bound.
    Rlc(Common),
    /// Run the invariant suite.
    Check(Common),
}

enum Failure {
    Config(String),
    Numeric(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_configuration() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

fn load(common: &Common) -> Result<Context, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.output.si |= common.si;
    cfg.validate()?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let out = PathBuf::from(&cfg.output.dir);
    Ok(Context { cfg, out })
}

fn flag_protocol(cfg: &RunConfig) {
    if matches!(cfg.trap.protocol, TrapProtocol::Paper) {
        eprintln!("note: trap stiffness 4kT/(2-t)^2 + gamma/(2-t) is evaluated literally in SI; its two terms carry different units");
    }
}

fn trajectory(cfg: &RunConfig) -> Result<MomentTrajectory, Failure> {
    if cfg.scenario == ScenarioKind::Trap {
        flag_protocol(cfg);
    }
    let system = cfg.system()?;
    let initial = cfg.initial(&system)?;
    Ok(propagate_moments(&system, &initial, cfg.steps())?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes()).map_err(|e| Failure::Numeric(e.to_string()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(ctx: &Context) -> Result<(), Failure> {
    let traj = trajectory(&ctx.cfg)?;
    let rates = trajectory_rates(&traj)?;
    let labels = ctx.cfg.coordinate_labels(traj.system.dim());
    let csv = trajectory_csv(&traj, &rates, &labels, ctx.cfg.output.si, &ctx.cfg.to_toml());
    write(&ctx.out.join("trajectory.csv"), &csv)
}

fn report_summary(reports: &[BoundReport]) -> Result<(), Failure> {
    for r in reports {
        println!("{:<24} {:<5} slack {:e}", r.kind.to_string(), if r.satisfied { "ok" } else { "FAIL" }, r.slack);
    }
    let bad: Vec<String> = reports.iter().filter(|r| !r.satisfied).map(|r| r.kind.to_string()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("bounds violated: {}", bad.join(", "))))
    }
}

fn bounds(ctx: &Context) -> Result<(), Failure> {
    let traj = trajectory(&ctx.cfg)?;
    let b = accumulate_actions(&traj)?;
    let kinds = ctx.cfg.bound_kinds()?.unwrap_or_else(|| applicable_bounds(&traj));
    let opts = BoundOptions {
        tolerance: ctx.cfg.bounds.tolerance,
        ..BoundOptions::default()
    };
    let reports = kinds
        .into_iter()
        .map(|k| evaluate_bound_with(k, &traj, &b, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    write(&ctx.out.join("bounds.jsonl"), &bounds_jsonl(&reports, b.kb, ctx.cfg.output.si))?;
    report_summary(&reports)
}

fn fig1(ctx: &Context) -> Result<(), Failure> {
    flag_protocol(&ctx.cfg);
    let rows = figure1_sweep(&ctx.cfg.trap, &ctx.cfg.sweep.values());
    write(&ctx.out.join("fig1.csv"), &fig1_csv(&rows, &ctx.cfg.to_toml()))?;
    write(&ctx.out.join("fig1.svg"), &fig1_svg(&rows))?;
    let failed: Vec<_> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!("γ/m = {:e}: {}", r.gamma_over_m, r.error.as_deref().unwrap_or_default());
    }
    let ok = rows.len() - failed.len();
    println!("{ok} of {} sweep points succeeded", rows.len());
    if ok as f64 >= 0.9 * rows.len() as f64 {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("only {ok} of {} sweep points succeeded", rows.len())))
    }
}

fn rlc(ctx: &Context) -> Result<(), Failure> {
    let run = rlc_experiment(&ctx.cfg.rlc)?;
    let rates = trajectory_rates(&run.trajectory)?;
    let mut cfg = ctx.cfg.clone();
    cfg.scenario = ScenarioKind::Rlc;
    let labels = cfg.coordinate_labels(2);
    let csv = trajectory_csv(&run.trajectory, &rates, &labels, cfg.output.si, &cfg.to_toml());
    write(&ctx.out.join("rlc_trajectory.csv"), &csv)?;
    let reports = [run.report];
    write(&ctx.out.join("rlc_bounds.jsonl"), &bounds_jsonl(&reports, run.breakdown.kb, cfg.output.si))?;
    report_summary(&reports)
}

fn check(ctx: &Context) -> Result<(), Failure> {
    let outcomes = run_check(&ctx.cfg);
    println!("{:<22} {:<6} detail", "suite", "status");
    for o in &outcomes {
        println!("{:<22} {:<6} {}", o.suite, if o.passed { "pass" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.suite).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("invariants violated: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&Context) -> Result<(), Failure>) = match &cli.command {
        Command::Simulate(c) => (c, simulate),
        Command::Bounds(c) => (c, bounds),
        Command::Fig1(c) => (c, fig1),
        Command::Rlc(c) => (c, rlc),
        Command::Check(c) => (c, check),
    };
    match load(common).and_then(|ctx| run(&ctx)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
    }
}

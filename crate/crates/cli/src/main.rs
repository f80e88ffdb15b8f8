//! Command-line driver: power flow, time-domain runs, and the
//! work-precision benchmark.
//!
//! Exit codes: 0 success, 1 validation/case errors, 2 solver failures.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tstab_core::case::{ensure_traditional_representable, load_case, SystemCase};
use tstab_core::csvio::{
    write_bench_csv, write_bench_csv_file, write_trajectory_csv, write_trajectory_csv_file,
};
use tstab_core::powerflow::{init_dynamics, nr_powerflow};
use tstab_core::solver::{integrate, GammaPolicy, NewtonConfig, StepController, StepperKind};
use tstab_core::workprec::{bench_work_precision, BenchConfig};

#[derive(Parser)]
#[command(
    name = "tstab",
    about = "Transient stability simulation on a mass-matrix DAE formulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the AC power flow and print the bus table.
    Powerflow(PowerflowArgs),
    /// Integrate the dynamic case and write the trajectory CSV.
    Run(RunArgs),
    /// Work-precision benchmark over a solver and step-size grid.
    Bench(BenchArgs),
}

#[derive(Args)]
struct PowerflowArgs {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20)]
    max_iter: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    case: PathBuf,
    /// Stepper: ie | trap | bdf2 (defaults to the case setting).
    #[arg(long)]
    solver: Option<String>,
    /// mass (native) or traditional (all-ones mass twin).
    #[arg(long, default_value = "mass")]
    formulation: Formulation,
    /// Fixed step size in seconds.
    #[arg(long)]
    h: Option<f64>,
    /// Relative tolerance (enables adaptive stepping together with --atol).
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Algebraic-row scaling: "h" or a number.
    #[arg(long)]
    gamma: Option<String>,
    /// Final time in seconds (defaults to the case setting).
    #[arg(long)]
    tf: Option<f64>,
    /// Trajectory CSV destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    newton_tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Formulation {
    Mass,
    Traditional,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    case: PathBuf,
    /// Comma-separated steppers, e.g. "ie,trap,bdf2".
    #[arg(long, default_value = "ie,trap,bdf2", value_delimiter = ',')]
    solvers: Vec<String>,
    /// Comma-separated fixed step sizes in seconds.
    #[arg(long = "h-grid", default_value = "4e-3,2e-3,1e-3,5e-4", value_delimiter = ',')]
    h_grid: Vec<f64>,
    /// Timing repetitions per grid point.
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Reserved for future randomized workloads; accepted and ignored.
    #[arg(long)]
    seed: Option<u64>,
    /// Run grid cells concurrently (timings then include contention skew).
    #[arg(long = "parallel-bench", default_value_t = false)]
    parallel_bench: bool,
    #[arg(long)]
    tf: Option<f64>,
    /// Benchmark CSV destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    newton_tol: f64,
}

enum CliError {
    /// Case/validation problems: exit 1.
    Validation(String),
    /// Numerical failures: exit 2.
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Solver(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Powerflow(args) => cmd_powerflow(args),
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load(path: &PathBuf) -> Result<SystemCase, CliError> {
    load_case(path).map_err(|e| CliError::Validation(e.to_string()))
}

fn parse_stepper(text: &str) -> Result<StepperKind, CliError> {
    text.parse().map_err(CliError::Validation)
}

fn cmd_powerflow(args: PowerflowArgs) -> Result<(), CliError> {
    let case = load(&args.case)?;
    let net = case.network_data();
    let sol = nr_powerflow(&net, &case.dispatch(), args.tol, args.max_iter)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    println!("# power flow: {}", case.name);
    println!(
        "# converged in {} iterations, final mismatch {:.3e}",
        sol.iterations, sol.final_mismatch
    );
    println!("{:<8} {:>10} {:>13} {:>12}", "bus", "V (pu)", "theta (rad)", "theta (deg)");
    for (k, bus) in net.buses.iter().enumerate() {
        println!(
            "{:<8} {:>10.6} {:>13.8} {:>12.6}",
            bus.id,
            sol.v[k],
            sol.theta[k],
            sol.theta[k].to_degrees()
        );
    }
    if !case.generators.is_empty() {
        println!("{:<8} {:>10} {:>10}", "gen", "P (pu)", "Q (pu)");
        for (i, gen) in case.generators.iter().enumerate() {
            println!("{:<8} {:>10.6} {:>10.6}", gen.id, sol.gen_p[i], sol.gen_q[i]);
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let case = load(&args.case)?;
    let sys = init_dynamics(&case, 1e-8, 20).map_err(|e| CliError::Solver(e.to_string()))?;
    for w in &sys.warnings {
        eprintln!("warning: {w}");
    }

    let problem = match args.formulation {
        Formulation::Mass => sys.problem,
        Formulation::Traditional => {
            ensure_traditional_representable(&sys.problem).map_err(CliError::Validation)?;
            sys.problem
                .to_traditional()
                .map_err(|e| CliError::Validation(e.to_string()))?
        }
    };

    let kind = match &args.solver {
        Some(text) => parse_stepper(text)?,
        None => case.stepper().map_err(CliError::Validation)?,
    };
    let tf = args.tf.unwrap_or(case.simulation.tf);
    let gamma = match args.gamma.as_deref() {
        None => case.gamma().map_err(CliError::Validation)?,
        Some("h") => GammaPolicy::EqualToH,
        Some(text) => GammaPolicy::Fixed(text.parse::<f64>().map_err(|_| {
            CliError::Validation(format!("--gamma must be \"h\" or a number, got `{text}`"))
        })?),
    };
    let ctrl = match (args.rtol, args.atol) {
        (Some(rtol), Some(atol)) => {
            let h0 = args.h.or(case.simulation.h).unwrap_or(1e-3);
            StepController::adaptive(h0, rtol, atol)
        }
        (None, None) => {
            let h = args
                .h
                .or(case.simulation.h)
                .ok_or_else(|| CliError::Validation("no step size: give --h or set simulation.h".into()))?;
            StepController::fixed(h)
        }
        _ => {
            return Err(CliError::Validation(
                "--rtol and --atol must be given together".into(),
            ))
        }
    };
    let newton = NewtonConfig {
        tol: args.newton_tol,
        gamma,
        ..NewtonConfig::default()
    };

    let traj = integrate(&problem, (0.0, tf), kind, &ctrl, &newton, &case.event_schedule())
        .map_err(|e| CliError::Solver(e.to_string()))?;

    eprintln!(
        "completed: {} accepted steps, {} rejected, {} Newton updates, {} events",
        traj.stats.steps_accepted,
        traj.stats.steps_rejected,
        traj.stats.newton_iters,
        traj.events().len()
    );

    match &args.output {
        Some(path) => write_trajectory_csv_file(&traj, problem.layout(), path)
            .map_err(|e| CliError::Solver(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_trajectory_csv(&traj, problem.layout(), &mut lock)
                .and_then(|()| lock.flush())
                .map_err(|e| CliError::Solver(format!("cannot write trajectory: {e}")))
        }
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let case = load(&args.case)?;
    if args.h_grid.is_empty() || args.h_grid.iter().any(|&h| h <= 0.0) {
        return Err(CliError::Validation("--h-grid needs positive step sizes".into()));
    }
    if args.runs == 0 {
        return Err(CliError::Validation("--runs must be at least 1".into()));
    }
    let _ = args.seed; // reserved
    let solvers = args
        .solvers
        .iter()
        .map(|s| parse_stepper(s))
        .collect::<Result<Vec<_>, _>>()?;
    let sys = init_dynamics(&case, 1e-8, 20).map_err(|e| CliError::Solver(e.to_string()))?;
    let tf = args.tf.unwrap_or(case.simulation.tf);

    let cfg = BenchConfig {
        solvers,
        h_grid: args.h_grid.clone(),
        runs: args.runs,
        newton_tol: args.newton_tol,
        parallel: args.parallel_bench,
        ..BenchConfig::default()
    };
    let records = bench_work_precision(&sys.problem, (0.0, tf), &case.event_schedule(), &cfg)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    for r in &records {
        if r.error.is_nan() {
            eprintln!("note: {} at h={} failed; row recorded with NaN error", r.solver, r.control);
        }
    }
    match &args.output {
        Some(path) => write_bench_csv_file(&records, path)
            .map_err(|e| CliError::Solver(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_bench_csv(&records, &mut lock)
                .and_then(|()| lock.flush())
                .map_err(|e| CliError::Solver(format!("cannot write benchmark: {e}")))
        }
    }
}

//! Work-precision benchmark harness.
//!
//! A reference trajectory is computed once (trapezoid at the finest grid
//! step divided by 64, Newton tolerance 1e-12 — second order at a 64x finer
//! step dominates every trial error on the grid). Each (solver, step) pair
//! then runs several times; the row records the mean wall time of the
//! integration call alone and the final-step error against the reference in
//! both the infinity and the 2-norm.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::SolveError;
use crate::problem::DaeProblem;
use crate::solver::{
    integrate_with_options, EventSchedule, GammaPolicy, IntegrateOptions, NewtonConfig,
    RecordMode, StepController, StepperKind,
};

/// One benchmark row.
#[derive(Debug, Clone)]
pub struct WorkPrecisionRecord {
    pub solver: String,
    /// Control parameter of the run (the fixed step size).
    pub control: String,
    /// Final-step error vs the reference, infinity norm over all variables.
    pub error: f64,
    /// Same difference in the 2-norm, recorded for transparency.
    pub error_l2: f64,
    /// Mean wall time of the integration call over `runs` repetitions (s).
    pub mean_time_s: f64,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub newton_iters: u64,
}

/// Benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub solvers: Vec<StepperKind>,
    /// Fixed step sizes, typically descending.
    pub h_grid: Vec<f64>,
    /// Timing repetitions per cell (the mean is reported).
    pub runs: usize,
    pub newton_tol: f64,
    pub gamma: GammaPolicy,
    /// Reference step = min(h_grid) / ref_divisor.
    pub ref_divisor: f64,
    pub ref_newton_tol: f64,
    /// Run grid cells concurrently. Timings then suffer contention skew, so
    /// the default is serial.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            solvers: vec![
                StepperKind::ImplicitEuler,
                StepperKind::Trapezoid,
                StepperKind::Bdf2,
            ],
            h_grid: vec![4e-3, 2e-3, 1e-3, 5e-4],
            runs: 5,
            newton_tol: 1e-8,
            gamma: GammaPolicy::EqualToH,
            ref_divisor: 64.0,
            ref_newton_tol: 1e-12,
            parallel: false,
        }
    }
}

fn final_state(
    problem: &DaeProblem,
    span: (f64, f64),
    kind: StepperKind,
    h: f64,
    newton: &NewtonConfig,
    events: &EventSchedule,
) -> Result<(Vec<f64>, crate::trajectory::RunStats), SolveError> {
    let traj = integrate_with_options(
        problem,
        span,
        kind,
        &StepController::fixed(h),
        newton,
        events,
        &IntegrateOptions {
            record: RecordMode::FinalOnly,
        },
    )?;
    Ok((
        traj.last_row().expect("final-only run keeps one row").to_vec(),
        traj.stats,
    ))
}

/// The reference final state used by the error column.
pub fn reference_final_state(
    problem: &DaeProblem,
    span: (f64, f64),
    events: &EventSchedule,
    cfg: &BenchConfig,
) -> Result<Vec<f64>, SolveError> {
    let h_min = cfg
        .h_grid
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let h_ref = h_min / cfg.ref_divisor;
    let newton = NewtonConfig {
        tol: cfg.ref_newton_tol,
        gamma: cfg.gamma,
        ..NewtonConfig::default()
    };
    final_state(problem, span, StepperKind::Trapezoid, h_ref, &newton, events).map(|(z, _)| z)
}

/// Run the full grid. Solver failures produce NaN-sentinel rows rather than
/// aborting the harness. The problem is shared immutably; every run owns its
/// workspace, so rows are deterministic apart from the timing column.
pub fn bench_work_precision(
    problem: &DaeProblem,
    span: (f64, f64),
    events: &EventSchedule,
    cfg: &BenchConfig,
) -> Result<Vec<WorkPrecisionRecord>, SolveError> {
    let reference = reference_final_state(problem, span, events, cfg)?;
    let newton = NewtonConfig {
        tol: cfg.newton_tol,
        gamma: cfg.gamma,
        ..NewtonConfig::default()
    };

    let cells: Vec<(StepperKind, f64)> = cfg
        .solvers
        .iter()
        .flat_map(|&s| cfg.h_grid.iter().map(move |&h| (s, h)))
        .collect();

    let run_cell = |&(kind, h): &(StepperKind, f64)| -> WorkPrecisionRecord {
        let mut times = Vec::with_capacity(cfg.runs);
        let mut outcome: Option<(Vec<f64>, crate::trajectory::RunStats)> = None;
        let mut failed = false;
        for _ in 0..cfg.runs {
            let start = Instant::now();
            match final_state(problem, span, kind, h, &newton, events) {
                Ok(res) => {
                    times.push(start.elapsed().as_secs_f64());
                    outcome = Some(res);
                }
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        match (failed, outcome) {
            (false, Some((z, stats))) => {
                let (mut e_inf, mut e_l2) = (0.0f64, 0.0f64);
                for (a, b) in z.iter().zip(&reference) {
                    let d = (a - b).abs();
                    e_inf = e_inf.max(d);
                    e_l2 += d * d;
                }
                WorkPrecisionRecord {
                    solver: kind.name().to_string(),
                    control: format!("{h}"),
                    error: e_inf,
                    error_l2: e_l2.sqrt(),
                    mean_time_s: times.iter().sum::<f64>() / times.len() as f64,
                    steps_accepted: stats.steps_accepted,
                    steps_rejected: stats.steps_rejected,
                    newton_iters: stats.newton_iters,
                }
            }
            _ => WorkPrecisionRecord {
                solver: kind.name().to_string(),
                control: format!("{h}"),
                error: f64::NAN,
                error_l2: f64::NAN,
                mean_time_s: f64::NAN,
                steps_accepted: 0,
                steps_rejected: 0,
                newton_iters: 0,
            },
        }
    };

    let records: Vec<WorkPrecisionRecord> = if cfg.parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    };
    Ok(records)
}

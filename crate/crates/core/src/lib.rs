//! Transient stability simulation on a mass-matrix DAE formulation.
//!
//! The engine represents the system as `M ẋ = f̂(x, y, u)`, `0 = g(x, y, u)`
//! with a diagonal nonnegative mass matrix: time constants move from equation
//! denominators onto the diagonal, and setting one to zero converts the state
//! into an algebraic constraint without touching the equation. Implicit
//! steppers (trapezoid, implicit Euler, BDF2) share a sparse-stamped Newton
//! kernel; the only change against the classical iteration is the mass
//! diagonal in place of the identity block.
//!
//! Crate layout follows the subsystems: [`problem`] (assembly and
//! evaluation), [`blocks`] and [`machines`] (component models), [`network`]
//! and [`powerflow`] (the algebraic layer and its initialization), [`solver`]
//! (integration), and [`case`]/[`csvio`]/[`workprec`] (ingestion, output and
//! the work-precision harness).

pub mod blocks;
pub mod case;
pub mod csvio;
pub mod error;
pub mod layout;
pub mod machines;
pub mod mass;
pub mod network;
pub mod powerflow;
pub mod problem;
pub mod solver;
pub mod sparse;
pub mod trajectory;
pub mod workprec;

pub use case::{load_case, parse_case, SystemCase};
pub use error::{AssemblyError, CaseError, EvalError, NetworkError, PowerFlowError, SolveError};
pub use layout::{VarInfo, VarKind, VariableLayout};
pub use mass::{mass_rank, MassDiagonal};
pub use powerflow::{init_dynamics, nr_powerflow, InitializedSystem, PowerFlowSolution};
pub use problem::{assemble_problem, ConsistencyReport, DaeProblem, InitialCondition, JacWorkspace, Model};
pub use solver::{
    integrate, newton_solve, EventSchedule, GammaPolicy, NewtonConfig, StepController, StepMode,
    StepperKind,
};
pub use sparse::SparseMatrixHandle;
pub use trajectory::{RunStats, Trajectory};
pub use workprec::{bench_work_precision, BenchConfig, WorkPrecisionRecord};

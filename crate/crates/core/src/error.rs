//! Error types shared across the engine.

use thiserror::Error;

/// Errors raised while assembling a [`crate::DaeProblem`] from model contributions.
#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate discrete name `{0}`")]
    DuplicateDiscrete(String),
    #[error("dangling reference `{reference}` from `{owner}`")]
    DanglingReference { owner: String, reference: String },
    #[error("negative mass entry {value} on row `{row}`")]
    NegativeMass { row: String, value: f64 },
    #[error("no equations: model list is empty")]
    Empty,
    #[error("invalid parameter on `{owner}`: {message}")]
    InvalidParameter { owner: String, message: String },
}

/// Non-finite values detected during residual or Jacobian evaluation.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("non-finite residual in equation `{equation}`")]
    NonFiniteResidual { equation: String },
    #[error("non-finite Jacobian entry at ({row}, {col})")]
    NonFiniteJacobian { row: String, col: String },
    #[error("voltage magnitude below 1e-6 at bus `{bus}` with constant-power load")]
    VoltageCollapse { bus: String },
}

/// Errors from the Newton kernel and the integration loop.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton did not converge in {max_iter} iterations (last residual {residual_norm:.3e})")]
    MaxIterExceeded { max_iter: usize, residual_norm: f64 },
    #[error("singular iteration matrix (pivot row {pivot_row})")]
    SingularMatrix { pivot_row: usize },
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("BDF2 history unavailable at t = {t}")]
    HistoryUnavailable { t: f64 },
    #[error("event at t = {time} outside simulation span [{t0}, {tf}]")]
    EventOutsideSpan { time: f64, t0: f64, tf: f64 },
    #[error("event error at t = {time}: {message}")]
    EventFailed { time: f64, message: String },
    #[error("mass entry is zero on row `{row}`: not representable in traditional form")]
    NotRepresentable { row: String },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("step to t = {t} failed: {source}")]
    StepFailed {
        t: f64,
        #[source]
        source: Box<SolveError>,
    },
    #[error("evaluation failed at t = {t}: {source}")]
    Eval {
        t: f64,
        #[source]
        source: EvalError,
    },
}

/// Power flow failures.
#[derive(Debug, Error)]
pub enum PowerFlowError {
    #[error("power flow did not converge in {iterations} iterations (worst mismatch {mismatch:.3e} at bus `{bus}`)")]
    NonConvergence {
        iterations: usize,
        mismatch: f64,
        bus: String,
    },
    #[error("singular power flow Jacobian at iteration {iteration}")]
    Singular { iteration: usize },
    #[error("network error: {0}")]
    Network(#[from] NetworkError),
    #[error("initialization of `{element}` failed: {message}")]
    InitFailed { element: String, message: String },
}

/// Network topology and switching errors.
#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network splits into {islands} islands with the in-service lines")]
    Island { islands: usize },
    #[error("line `{line}` is already {status}")]
    RedundantSwitch { line: String, status: String },
    #[error("unknown line `{0}`")]
    UnknownLine(String),
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("invalid line `{line}`: {message}")]
    InvalidLine { line: String, message: String },
}

/// Case file ingestion errors.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected 1)")]
    SchemaVersion(u32),
    #[error("dangling reference `{reference}` in {element}")]
    DanglingReference { element: String, reference: String },
    #[error("invalid case: {0}")]
    Invariant(String),
}

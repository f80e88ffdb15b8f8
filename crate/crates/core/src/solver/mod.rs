//! Implicit integration of the mass-matrix DAE.
//!
//! Three steppers share one Newton kernel and one step controller: the
//! adapted implicit trapezoid (the only change from the classical scheme is
//! the mass diagonal in place of the identity block), implicit Euler, and
//! BDF2 with variable-step coefficients. Discontinuities are handled by
//! stopping exactly on the event time, applying the discrete change,
//! re-solving the algebraic subsystem with the differential states frozen,
//! and restarting (BDF2 through one implicit Euler step).

mod adapt;
mod integrate;
mod newton;
mod stepper;

pub use adapt::estimate_error_and_adapt;
pub use integrate::{integrate, integrate_with_options, resolve_algebraic, IntegrateOptions, RecordMode};
pub use newton::newton_solve;
pub use stepper::{bdf2_step, ie_step, itm_jacobian, itm_residual, trapezoid_step};

use crate::error::SolveError;

/// Scaling of the algebraic residual rows in the step equations. Any nonzero
/// value solves the same system; values near `h` condition Newton better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    EqualToH,
    Fixed(f64),
}

impl GammaPolicy {
    pub fn resolve(&self, h: f64) -> f64 {
        match *self {
            GammaPolicy::EqualToH => h,
            GammaPolicy::Fixed(v) => v,
        }
    }
}

/// Newton kernel configuration.
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Residual infinity-norm bound for acceptance.
    pub tol: f64,
    pub max_iter: usize,
    pub gamma: GammaPolicy,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 15,
            gamma: GammaPolicy::EqualToH,
        }
    }
}

impl NewtonConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(SolveError::InvalidConfig(format!(
                "Newton tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter < 1 {
            return Err(SolveError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if let GammaPolicy::Fixed(v) = self.gamma {
            if v == 0.0 || !v.is_finite() {
                return Err(SolveError::InvalidConfig(format!(
                    "gamma must be nonzero and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Which implicit stepper drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepperKind {
    ImplicitEuler,
    Trapezoid,
    /// Requires one startup step from implicit Euler after t0 and after
    /// every event.
    Bdf2,
}

impl StepperKind {
    /// Classical order of accuracy, used by the step-size controller.
    pub fn order(&self) -> usize {
        match self {
            StepperKind::ImplicitEuler => 1,
            StepperKind::Trapezoid | StepperKind::Bdf2 => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepperKind::ImplicitEuler => "ie",
            StepperKind::Trapezoid => "trap",
            StepperKind::Bdf2 => "bdf2",
        }
    }
}

impl std::str::FromStr for StepperKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ie" | "implicit-euler" | "impliciteuler" => Ok(StepperKind::ImplicitEuler),
            "trap" | "trapezoid" | "itm" => Ok(StepperKind::Trapezoid),
            "bdf2" => Ok(StepperKind::Bdf2),
            other => Err(format!("unknown stepper `{other}` (expected ie|trap|bdf2)")),
        }
    }
}

/// Fixed or adaptive step-size control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Fixed,
    Adaptive,
}

/// Step-size configuration. Fixed mode walks the grid `h0` (clipped to land
/// exactly on events and the final time); adaptive mode controls the local
/// error from step doubling.
#[derive(Debug, Clone, Copy)]
pub struct StepController {
    pub mode: StepMode,
    pub h0: f64,
    pub hmin: f64,
    pub hmax: f64,
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
}

impl StepController {
    pub fn fixed(h: f64) -> Self {
        Self {
            mode: StepMode::Fixed,
            h0: h,
            hmin: h,
            hmax: h,
            rtol: 1e-6,
            atol: 1e-9,
            safety: 0.9,
        }
    }

    pub fn adaptive(h0: f64, rtol: f64, atol: f64) -> Self {
        Self {
            mode: StepMode::Adaptive,
            h0,
            hmin: h0 * 1e-9,
            hmax: h0 * 1e3,
            rtol,
            atol,
            safety: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.hmin > 0.0 && self.hmin <= self.h0 && self.h0 <= self.hmax) {
            return Err(SolveError::InvalidConfig(format!(
                "require 0 < hmin <= h0 <= hmax, got hmin={} h0={} hmax={}",
                self.hmin, self.h0, self.hmax
            )));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(SolveError::InvalidConfig(format!(
                "rtol and atol must be positive, got rtol={} atol={}",
                self.rtol, self.atol
            )));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(SolveError::InvalidConfig(format!(
                "safety must lie in (0, 1], got {}",
                self.safety
            )));
        }
        Ok(())
    }
}

/// A discrete change applied at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventAction {
    LineTrip(String),
    LineReconnect(String),
    SetDiscrete {
        target: String,
        field: String,
        change: DiscreteChange,
    },
}

impl EventAction {
    pub fn describe(&self) -> String {
        match self {
            EventAction::LineTrip(line) => format!("trip {line}"),
            EventAction::LineReconnect(line) => format!("reconnect {line}"),
            EventAction::SetDiscrete { target, field, change } => match change {
                DiscreteChange::Set(v) => format!("set {target}.{field} = {v}"),
                DiscreteChange::Delta(d) => format!("shift {target}.{field} by {d}"),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscreteChange {
    Set(f64),
    Delta(f64),
}

/// Time-sorted list of events.
#[derive(Debug, Clone, Default)]
pub struct EventSchedule {
    events: Vec<Event>,
}

impl EventSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mut events: Vec<Event>) -> Self {
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// All events must fall inside the simulation span.
    pub fn validate_span(&self, t0: f64, tf: f64) -> Result<(), SolveError> {
        for e in &self.events {
            if e.time < t0 || e.time > tf {
                return Err(SolveError::EventOutsideSpan {
                    time: e.time,
                    t0,
                    tf,
                });
            }
        }
        Ok(())
    }
}

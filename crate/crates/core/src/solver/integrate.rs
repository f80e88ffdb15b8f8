//! The integration loop: fixed or step-doubling adaptive stepping with
//! exact landing on event times.

use super::adapt::weighted_error;
use super::stepper::{scheme_step, Scheme, StepInputs};
use super::{
    estimate_error_and_adapt, newton_solve, DiscreteChange, EventAction, EventSchedule,
    NewtonConfig, StepController, StepMode, StepperKind,
};
use crate::error::SolveError;
use crate::network::line_status_slot_name;
use crate::problem::DaeProblem;
use crate::trajectory::{RunStats, Trajectory};
use nalgebra::DMatrix;

/// What the trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Every accepted step (the default).
    All,
    /// Only the final state; benchmark runs use this to keep reference
    /// integrations at tiny steps from holding full histories.
    FinalOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub record: RecordMode,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            record: RecordMode::All,
        }
    }
}

/// Integrate the problem over `span`, starting from its initial condition.
///
/// Steps land exactly on every event time and on the final time. At an event
/// the discrete state is updated, the algebraic subsystem (the g rows plus
/// any zero-mass rows) is re-solved with the remaining differential states
/// frozen, f̂ history is re-evaluated, and BDF2 restarts through one implicit
/// Euler step.
pub fn integrate(
    p: &DaeProblem,
    span: (f64, f64),
    kind: StepperKind,
    ctrl: &StepController,
    newton: &NewtonConfig,
    events: &EventSchedule,
) -> Result<Trajectory, SolveError> {
    integrate_with_options(p, span, kind, ctrl, newton, events, &IntegrateOptions::default())
}

struct CompiledEvent {
    time: f64,
    slot: usize,
    change: CompiledChange,
    label: String,
}

enum CompiledChange {
    Toggle { from: f64, to: f64 },
    Set(f64),
    Delta(f64),
}

fn compile_events(p: &DaeProblem, events: &EventSchedule) -> Result<Vec<CompiledEvent>, SolveError> {
    let mut out = Vec::with_capacity(events.events().len());
    for e in events.events() {
        let (slot_name, change) = match &e.action {
            EventAction::LineTrip(line) => (
                line_status_slot_name(line),
                CompiledChange::Toggle { from: 1.0, to: 0.0 },
            ),
            EventAction::LineReconnect(line) => (
                line_status_slot_name(line),
                CompiledChange::Toggle { from: 0.0, to: 1.0 },
            ),
            EventAction::SetDiscrete { target, field, change } => (
                format!("{target}.{field}"),
                match change {
                    DiscreteChange::Set(v) => CompiledChange::Set(*v),
                    DiscreteChange::Delta(d) => CompiledChange::Delta(*d),
                },
            ),
        };
        let slot = p.discrete_slot(&slot_name).ok_or_else(|| SolveError::EventFailed {
            time: e.time,
            message: format!("unknown discrete target `{slot_name}`"),
        })?;
        out.push(CompiledEvent {
            time: e.time,
            slot,
            change,
            label: e.action.describe(),
        });
    }
    Ok(out)
}

fn apply_change(u: &mut [f64], ev: &CompiledEvent) -> Result<(), SolveError> {
    match ev.change {
        CompiledChange::Toggle { from, to } => {
            if u[ev.slot] != from {
                return Err(SolveError::EventFailed {
                    time: ev.time,
                    message: format!("{}: target is not in the required state", ev.label),
                });
            }
            u[ev.slot] = to;
        }
        CompiledChange::Set(v) => u[ev.slot] = v,
        CompiledChange::Delta(d) => u[ev.slot] += d,
    }
    Ok(())
}

/// Re-solve the algebraic subsystem at fixed differential states: drives the
/// `g` rows and every zero-mass (converted) row to zero by varying the
/// algebraic variables and converted states only. Returns Newton updates.
pub fn resolve_algebraic(
    p: &DaeProblem,
    x: &mut [f64],
    y: &mut [f64],
    u: &[f64],
    t: f64,
    cfg: &NewtonConfig,
) -> Result<usize, SolveError> {
    let n = p.n_diff();
    let m = p.n_alg();
    let converted = p.mass().zero_rows();
    let nc = converted.len();
    let dim = nc + m;
    if dim == 0 {
        return Ok(0);
    }

    let mut xpos = vec![usize::MAX; n];
    for (k, &i) in converted.iter().enumerate() {
        xpos[i] = k;
    }

    let mut guess = Vec::with_capacity(dim);
    guess.extend(converted.iter().map(|&i| x[i]));
    guess.extend_from_slice(y);

    // The residual and Jacobian closures each own scratch copies of the full
    // state so their borrows stay disjoint.
    let mut xr = x.to_vec();
    let mut yr = y.to_vec();
    let mut f_hat = vec![0.0; n];
    let mut g = vec![0.0; m];
    let converted_r = converted.clone();
    let residual = |w: &[f64], out: &mut [f64]| -> Result<(), SolveError> {
        for (k, &i) in converted_r.iter().enumerate() {
            xr[i] = w[k];
        }
        yr.copy_from_slice(&w[nc..]);
        p.eval_residuals_into(&xr, &yr, u, t, &mut f_hat, &mut g)
            .map_err(|source| SolveError::Eval { t, source })?;
        for (k, &i) in converted_r.iter().enumerate() {
            out[k] = f_hat[i];
        }
        out[nc..].copy_from_slice(&g);
        Ok(())
    };

    let mut xj = x.to_vec();
    let mut yj = y.to_vec();
    let mut jac = p.jacobian_workspace();
    let converted_j = converted.clone();
    let jacobian = |w: &[f64], a: &mut DMatrix<f64>| -> Result<(), SolveError> {
        for (k, &i) in converted_j.iter().enumerate() {
            xj[i] = w[k];
        }
        yj.copy_from_slice(&w[nc..]);
        p.eval_jacobians(&xj, &yj, u, t, &mut jac)
            .map_err(|source| SolveError::Eval { t, source })?;
        a.fill(0.0);
        for (&(r, c), &v) in jac.fx.pattern().iter().zip(jac.fx.values()) {
            let (rp, cp) = (xpos[r as usize], xpos[c as usize]);
            if rp != usize::MAX && cp != usize::MAX {
                a[(rp, cp)] += v;
            }
        }
        for (&(r, c), &v) in jac.fy.pattern().iter().zip(jac.fy.values()) {
            let rp = xpos[r as usize];
            if rp != usize::MAX {
                a[(rp, nc + c as usize)] += v;
            }
        }
        for (&(r, c), &v) in jac.gx.pattern().iter().zip(jac.gx.values()) {
            let cp = xpos[c as usize];
            if cp != usize::MAX {
                a[(nc + r as usize, cp)] += v;
            }
        }
        for (&(r, c), &v) in jac.gy.pattern().iter().zip(jac.gy.values()) {
            a[(nc + r as usize, nc + c as usize)] += v;
        }
        Ok(())
    };

    let (w, iters) = newton_solve(residual, jacobian, &guess, cfg)?;
    for (k, &i) in converted.iter().enumerate() {
        x[i] = w[k];
    }
    y.copy_from_slice(&w[nc..]);
    Ok(iters)
}

pub fn integrate_with_options(
    p: &DaeProblem,
    span: (f64, f64),
    kind: StepperKind,
    ctrl: &StepController,
    newton: &NewtonConfig,
    events: &EventSchedule,
    opts: &IntegrateOptions,
) -> Result<Trajectory, SolveError> {
    let (t0, tf) = span;
    if tf.is_nan() || t0.is_nan() || tf <= t0 {
        return Err(SolveError::InvalidConfig(format!(
            "span must satisfy t0 < tf, got [{t0}, {tf}]"
        )));
    }
    ctrl.validate()?;
    newton.validate()?;
    events.validate_span(t0, tf)?;
    let compiled = compile_events(p, events)?;

    let n = p.n_diff();
    let m = p.n_alg();
    let mut x = p.initial().x.clone();
    let mut y = p.initial().y.clone();
    let mut u = p.initial().u.clone();
    let mut t = t0;

    let mut traj = Trajectory::new(n + m);
    let mut stats = RunStats::default();
    let time_tol = (tf - t0).abs() * 1e-12;

    let mut ev_idx = 0usize;
    let mut history_reset = false;
    consume_events(
        p, &compiled, &mut ev_idx, t, &mut x, &mut y, &mut u, newton, &mut traj, &mut stats,
        time_tol, &mut history_reset,
    )?;
    if opts.record == RecordMode::All {
        push_row(&mut traj, t, &x, &y);
    }

    let (mut f_prev, _) = p
        .eval_residuals(&x, &y, &u, t)
        .map_err(|source| SolveError::Eval { t, source })?;

    // BDF2 history: the point before `x` and its spacing.
    let mut x_prev2: Option<Vec<f64>> = None;
    let mut h_last = 0.0f64;
    let mut h_live = ctrl.h0;

    while t < tf - time_tol {
        let next_stop = compiled
            .get(ev_idx)
            .map(|e| e.time)
            .unwrap_or(tf)
            .min(tf);
        let remaining = next_stop - t;
        let mut h_eff = h_live.min(remaining);
        if remaining <= h_live * (1.0 + 1e-9) {
            h_eff = remaining;
        }

        let accepted = match ctrl.mode {
            StepMode::Fixed => {
                let (scheme, _) = select_scheme(kind, x_prev2.is_some(), h_eff, h_last);
                let inputs = StepInputs {
                    x_prev: &x,
                    y_prev: &y,
                    f_hat_prev: &f_prev,
                    x_prev2: x_prev2.as_deref(),
                };
                let gamma = newton.gamma.resolve(h_eff);
                let (xn, yn, fn_, iters) =
                    scheme_step(p, scheme, &inputs, &u, t + h_eff, h_eff, gamma, newton)
                        .map_err(|e| SolveError::StepFailed {
                            t: t + h_eff,
                            source: Box::new(e),
                        })?;
                stats.newton_iters += iters as u64;
                Some((xn, yn, fn_, h_eff))
            }
            StepMode::Adaptive => {
                adaptive_step(
                    p, kind, ctrl, newton, &x, &y, &f_prev, x_prev2.as_deref(), h_last, &u, t,
                    &mut h_eff, &mut h_live, remaining, &mut stats,
                )?
            }
        };

        let (xn, yn, fn_, h_used) = accepted.expect("a step is always produced or an error raised");
        let landed = (h_used - remaining).abs() <= remaining * 1e-9;
        let t_new = if landed { next_stop } else { t + h_used };

        x_prev2 = Some(std::mem::replace(&mut x, xn));
        h_last = h_used;
        y = yn;
        f_prev = fn_;
        t = t_new;
        stats.steps_accepted += 1;
        if opts.record == RecordMode::All {
            push_row(&mut traj, t, &x, &y);
        }

        let mut reset = false;
        consume_events(
            p, &compiled, &mut ev_idx, t, &mut x, &mut y, &mut u, newton, &mut traj, &mut stats,
            time_tol, &mut reset,
        )?;
        if reset {
            // Discrete state changed: refresh f̂ history, update the recorded
            // point to the post-event values, restart multistep history.
            f_prev = p
                .eval_residuals(&x, &y, &u, t)
                .map(|(f, _)| f)
                .map_err(|source| SolveError::Eval { t, source })?;
            x_prev2 = None;
            h_last = 0.0;
            if opts.record == RecordMode::All {
                let mut row = Vec::with_capacity(n + m);
                row.extend_from_slice(&x);
                row.extend_from_slice(&y);
                traj.replace_last_row(&row);
            }
        }
    }

    if opts.record == RecordMode::FinalOnly {
        push_row(&mut traj, t, &x, &y);
    }
    traj.stats = stats;
    Ok(traj)
}

fn push_row(traj: &mut Trajectory, t: f64, x: &[f64], y: &[f64]) {
    let mut row = Vec::with_capacity(x.len() + y.len());
    row.extend_from_slice(x);
    row.extend_from_slice(y);
    traj.push_row(t, &row);
}

/// Scheme and its order for the next attempt. BDF2 uses one implicit Euler
/// startup step whenever history is missing.
fn select_scheme(kind: StepperKind, has_history: bool, h: f64, h_last: f64) -> (Scheme, usize) {
    match kind {
        StepperKind::ImplicitEuler => (Scheme::ImplicitEuler, 1),
        StepperKind::Trapezoid => (Scheme::Trapezoid, 2),
        StepperKind::Bdf2 => {
            if has_history && h_last > 0.0 {
                (Scheme::Bdf2 { ratio: h / h_last }, 2)
            } else {
                (Scheme::ImplicitEuler, 1)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn consume_events(
    p: &DaeProblem,
    compiled: &[CompiledEvent],
    ev_idx: &mut usize,
    t: f64,
    x: &mut [f64],
    y: &mut [f64],
    u: &mut [f64],
    newton: &NewtonConfig,
    traj: &mut Trajectory,
    stats: &mut RunStats,
    time_tol: f64,
    changed: &mut bool,
) -> Result<(), SolveError> {
    let mut any = false;
    while *ev_idx < compiled.len() && (compiled[*ev_idx].time - t).abs() <= time_tol.max(1e-14) {
        let ev = &compiled[*ev_idx];
        apply_change(u, ev)?;
        p.validate_discrete(u).map_err(|message| SolveError::EventFailed {
            time: ev.time,
            message,
        })?;
        traj.push_event(t, &ev.label);
        *ev_idx += 1;
        any = true;
    }
    if any {
        let iters = resolve_algebraic(p, x, y, u, t, newton)?;
        stats.newton_iters += iters as u64;
        *changed = true;
    }
    Ok(())
}

/// Accepted step payload: (x, y, f̂ at the new point, step size used).
type AcceptedStep = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

/// Step-doubling attempt loop for adaptive mode: one step of `h` against two
/// of `h/2`; the composite fine solution is the accepted value.
#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    p: &DaeProblem,
    kind: StepperKind,
    ctrl: &StepController,
    newton: &NewtonConfig,
    x: &[f64],
    y: &[f64],
    f_prev: &[f64],
    x_prev2: Option<&[f64]>,
    h_last: f64,
    u: &[f64],
    t: f64,
    h_eff: &mut f64,
    h_live: &mut f64,
    remaining: f64,
    stats: &mut RunStats,
) -> Result<Option<AcceptedStep>, SolveError> {
    loop {
        let h = *h_eff;
        let attempt = try_doubled_step(p, kind, newton, x, y, f_prev, x_prev2, h_last, u, t, h);
        match attempt {
            Ok((big, fine, f_fine, iters, order)) => {
                stats.newton_iters += iters as u64;
                let err = weighted_error(&big, &fine, ctrl.rtol, ctrl.atol);
                let (accept, h_next) = estimate_error_and_adapt(err, h, order, ctrl);
                // Variable-step BDF2 is zero-stable only up to a step ratio
                // of about 1 + sqrt(2); cap its growth below that.
                let h_next = match kind {
                    StepperKind::Bdf2 => h_next.min(2.0 * h),
                    _ => h_next,
                };
                if accept {
                    *h_live = h_next;
                    let (xn, yn) = split_state(&fine, p.n_diff());
                    return Ok(Some((xn, yn, f_fine, h)));
                }
                stats.steps_rejected += 1;
                if h <= ctrl.hmin * (1.0 + 1e-9) {
                    // Cannot refine further; accept the fine solution at hmin.
                    *h_live = ctrl.hmin;
                    let (xn, yn) = split_state(&fine, p.n_diff());
                    return Ok(Some((xn, yn, f_fine, h)));
                }
                *h_eff = h_next.min(remaining);
            }
            Err(SolveError::MaxIterExceeded { .. }) | Err(SolveError::SingularMatrix { .. }) => {
                stats.steps_rejected += 1;
                if h <= ctrl.hmin * (1.0 + 1e-9) {
                    return Err(SolveError::StepSizeUnderflow { t, h });
                }
                *h_eff = (h * 0.5).max(ctrl.hmin).min(remaining);
            }
            Err(other) => return Err(other),
        }
    }
}

/// (big state, fine composite state, f̂ at the fine endpoint, Newton
/// updates, order used).
type DoubledStep = (Vec<f64>, Vec<f64>, Vec<f64>, usize, usize);

fn split_state(z: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    (z[..n].to_vec(), z[n..].to_vec())
}

/// One `h` step and two `h/2` steps from the same point. Returns the big and
/// composite states (x ++ y), f̂ at the composite endpoint, total Newton
/// updates, and the order used for adaptation.
#[allow(clippy::too_many_arguments)]
fn try_doubled_step(
    p: &DaeProblem,
    kind: StepperKind,
    newton: &NewtonConfig,
    x: &[f64],
    y: &[f64],
    f_prev: &[f64],
    x_prev2: Option<&[f64]>,
    h_last: f64,
    u: &[f64],
    t: f64,
    h: f64,
) -> Result<DoubledStep, SolveError> {
    let has_history = x_prev2.is_some() && h_last > 0.0;
    let mut total_iters = 0usize;

    let (scheme_big, order) = select_scheme(kind, has_history, h, h_last);
    let inputs = StepInputs {
        x_prev: x,
        y_prev: y,
        f_hat_prev: f_prev,
        x_prev2,
    };
    let gamma_big = newton.gamma.resolve(h);
    let (xb, yb, _, it) = scheme_step(p, scheme_big, &inputs, u, t + h, h, gamma_big, newton)?;
    total_iters += it;

    let hh = 0.5 * h;
    let gamma_half = newton.gamma.resolve(hh);
    let (scheme_h1, _) = select_scheme(kind, has_history, hh, h_last);
    let (xh, yh, fh, it) = scheme_step(p, scheme_h1, &inputs, u, t + hh, hh, gamma_half, newton)?;
    total_iters += it;

    // Second half step: history is now (half point, start point) at ratio 1.
    let (scheme_h2, _) = select_scheme(kind, true, hh, hh);
    let scheme_h2 = match kind {
        StepperKind::Bdf2 => scheme_h2,
        _ => scheme_h1,
    };
    let inputs2 = StepInputs {
        x_prev: &xh,
        y_prev: &yh,
        f_hat_prev: &fh,
        x_prev2: Some(x),
    };
    let (xf, yf, ff, it) = scheme_step(p, scheme_h2, &inputs2, u, t + h, hh, gamma_half, newton)?;
    total_iters += it;

    let mut big = xb;
    big.extend(yb);
    let mut fine = xf;
    fine.extend(yf);
    Ok((big, fine, ff, total_iters, order))
}

//! Step equations and Jacobians for the three implicit schemes.
//!
//! The trapezoid step solves
//! `p̂ = M_x (x_t − x_{t−h}) − 0.5 h (f̂_t + f̂_{t−h}) = 0`, `q = −γ g_t = 0`,
//! with iteration matrix
//! `Â = [[M_x − 0.5h f̂_x, −0.5h f̂_y], [−γ g_x, −γ g_y]]` — identical to the
//! classical scheme except that the mass diagonal replaces the identity
//! block. Implicit Euler and BDF2 share the same structure with their own
//! left-hand combination of history points.

use nalgebra::DMatrix;

use super::{newton_solve, NewtonConfig};
use crate::error::{EvalError, SolveError};
use crate::problem::{DaeProblem, JacWorkspace};

/// Left-hand combination of the differential states for one scheme:
/// `p̂ = M (c0 x_t + rhs_hist) − w_f (f̂ terms)`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Scheme {
    Trapezoid,
    ImplicitEuler,
    /// `ratio` is h divided by the previous accepted step size.
    Bdf2 { ratio: f64 },
}

impl Scheme {
    /// Coefficient multiplying `x_t` inside the mass term.
    fn c_new(&self) -> f64 {
        match *self {
            Scheme::Trapezoid | Scheme::ImplicitEuler => 1.0,
            Scheme::Bdf2 { ratio } => (1.0 + 2.0 * ratio) / (1.0 + ratio),
        }
    }

    /// Weight of `f̂_t` in the residual (the trapezoid also adds
    /// `0.5 h f̂_{t−h}` separately).
    fn f_weight(&self, h: f64) -> f64 {
        match *self {
            Scheme::Trapezoid => 0.5 * h,
            Scheme::ImplicitEuler | Scheme::Bdf2 { .. } => h,
        }
    }
}

/// Implicit-trapezoid residual pair (p̂, q) at a trial point.
///
/// `f_hat_prev` is the stored differential residual at the previous accepted
/// step (re-evaluated after events).
#[allow(clippy::too_many_arguments)]
pub fn itm_residual(
    p: &DaeProblem,
    x_t: &[f64],
    y_t: &[f64],
    x_prev: &[f64],
    f_hat_prev: &[f64],
    u: &[f64],
    t: f64,
    h: f64,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let (f_hat, g) = p.eval_residuals(x_t, y_t, u, t)?;
    let mass = p.mass().entries();
    let p_hat: Vec<f64> = (0..p.n_diff())
        .map(|i| mass[i] * (x_t[i] - x_prev[i]) - 0.5 * h * (f_hat[i] + f_hat_prev[i]))
        .collect();
    let q: Vec<f64> = g.iter().map(|gi| -gamma * gi).collect();
    Ok((p_hat, q))
}

/// Implicit-trapezoid iteration matrix at a trial point.
pub fn itm_jacobian(
    p: &DaeProblem,
    x_t: &[f64],
    y_t: &[f64],
    u: &[f64],
    t: f64,
    h: f64,
    gamma: f64,
) -> Result<DMatrix<f64>, EvalError> {
    let mut ws = p.jacobian_workspace();
    p.eval_jacobians(x_t, y_t, u, t, &mut ws)?;
    let dim = p.n_diff() + p.n_alg();
    let mut a = DMatrix::zeros(dim, dim);
    assemble_iteration_matrix(p, &ws, Scheme::Trapezoid, h, gamma, &mut a);
    Ok(a)
}

pub(crate) fn assemble_iteration_matrix(
    p: &DaeProblem,
    ws: &JacWorkspace,
    scheme: Scheme,
    h: f64,
    gamma: f64,
    a: &mut DMatrix<f64>,
) {
    let n = p.n_diff();
    a.fill(0.0);
    let c = scheme.c_new();
    for (i, &m) in p.mass().entries().iter().enumerate() {
        a[(i, i)] += c * m;
    }
    let wf = scheme.f_weight(h);
    ws.fx.scatter_add(a, -wf, 0, 0);
    ws.fy.scatter_add(a, -wf, 0, n);
    ws.gx.scatter_add(a, -gamma, n, 0);
    ws.gy.scatter_add(a, -gamma, n, n);
}

/// History the schemes need from the integration loop.
pub(crate) struct StepInputs<'a> {
    pub x_prev: &'a [f64],
    pub y_prev: &'a [f64],
    pub f_hat_prev: &'a [f64],
    /// Second-back point for BDF2.
    pub x_prev2: Option<&'a [f64]>,
}

/// One implicit step of the selected scheme: solves the nonlinear step
/// equations starting from the previous point. Returns (x, y, f̂ at the new
/// point, Newton updates).
/// (x, y, f̂ at the new point, Newton updates).
pub(crate) type SchemeStep = (Vec<f64>, Vec<f64>, Vec<f64>, usize);

#[allow(clippy::too_many_arguments)]
pub(crate) fn scheme_step(
    p: &DaeProblem,
    scheme: Scheme,
    inputs: &StepInputs,
    u: &[f64],
    t_new: f64,
    h: f64,
    gamma: f64,
    cfg: &NewtonConfig,
) -> Result<SchemeStep, SolveError> {
    let n = p.n_diff();
    let m = p.n_alg();
    let mass = p.mass().entries();
    let wf = scheme.f_weight(h);
    let c0 = scheme.c_new();

    // History combination M·(c1 x_prev + c2 x_prev2) and the trapezoid's
    // 0.5 h f̂_prev term fold into one constant vector.
    let mut rhs_const = vec![0.0; n];
    match scheme {
        Scheme::Trapezoid => {
            for i in 0..n {
                rhs_const[i] = -mass[i] * inputs.x_prev[i] - 0.5 * h * inputs.f_hat_prev[i];
            }
        }
        Scheme::ImplicitEuler => {
            for i in 0..n {
                rhs_const[i] = -mass[i] * inputs.x_prev[i];
            }
        }
        Scheme::Bdf2 { ratio } => {
            let x_prev2 = inputs.x_prev2.ok_or(SolveError::HistoryUnavailable { t: t_new })?;
            let c1 = -(1.0 + ratio);
            let c2 = ratio * ratio / (1.0 + ratio);
            for i in 0..n {
                rhs_const[i] = mass[i] * (c1 * inputs.x_prev[i] + c2 * x_prev2[i]);
            }
        }
    }

    let mut f_hat = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut jac = p.jacobian_workspace();

    let mut guess = Vec::with_capacity(n + m);
    guess.extend_from_slice(inputs.x_prev);
    guess.extend_from_slice(inputs.y_prev);

    let residual = |z: &[f64], out: &mut [f64]| -> Result<(), SolveError> {
        p.eval_residuals_into(&z[..n], &z[n..], u, t_new, &mut f_hat, &mut g)
            .map_err(|source| SolveError::Eval { t: t_new, source })?;
        for i in 0..n {
            out[i] = mass[i] * c0 * z[i] + rhs_const[i] - wf * f_hat[i];
        }
        for j in 0..m {
            out[n + j] = -gamma * g[j];
        }
        Ok(())
    };
    let jacobian = |z: &[f64], a: &mut DMatrix<f64>| -> Result<(), SolveError> {
        p.eval_jacobians(&z[..n], &z[n..], u, t_new, &mut jac)
            .map_err(|source| SolveError::Eval { t: t_new, source })?;
        assemble_iteration_matrix(p, &jac, scheme, h, gamma, a);
        Ok(())
    };

    let (z, iters) = newton_solve(residual, jacobian, &guess, cfg)?;
    // The Newton kernel's last residual evaluation was at the returned point,
    // so the f̂ buffer already holds f̂(x_t, y_t).
    let x_t = z[..n].to_vec();
    let y_t = z[n..].to_vec();
    Ok((x_t, y_t, f_hat, iters))
}

/// One implicit Euler step: `M (x_t − x_prev) − h f̂_t = 0`, `−γ g_t = 0`.
#[allow(clippy::too_many_arguments)]
pub fn ie_step(
    p: &DaeProblem,
    x_prev: &[f64],
    y_prev: &[f64],
    u: &[f64],
    t_new: f64,
    h: f64,
    gamma: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, Vec<f64>, usize), SolveError> {
    let f_hat_prev = vec![0.0; p.n_diff()];
    let inputs = StepInputs {
        x_prev,
        y_prev,
        f_hat_prev: &f_hat_prev,
        x_prev2: None,
    };
    scheme_step(p, Scheme::ImplicitEuler, &inputs, u, t_new, h, gamma, cfg)
        .map(|(x, y, _, iters)| (x, y, iters))
}

/// One trapezoid step; `f_hat_prev` is f̂ at the previous accepted point.
#[allow(clippy::too_many_arguments)]
pub fn trapezoid_step(
    p: &DaeProblem,
    x_prev: &[f64],
    y_prev: &[f64],
    f_hat_prev: &[f64],
    u: &[f64],
    t_new: f64,
    h: f64,
    gamma: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, Vec<f64>, usize), SolveError> {
    let inputs = StepInputs {
        x_prev,
        y_prev,
        f_hat_prev,
        x_prev2: None,
    };
    scheme_step(p, Scheme::Trapezoid, &inputs, u, t_new, h, gamma, cfg)
        .map(|(x, y, _, iters)| (x, y, iters))
}

/// One BDF2 step over two equally spaced history points:
/// `M (1.5 x_t − 2 x_prev + 0.5 x_prev2) − h f̂_t = 0`.
#[allow(clippy::too_many_arguments)]
pub fn bdf2_step(
    p: &DaeProblem,
    x_prev: &[f64],
    y_prev: &[f64],
    x_prev2: &[f64],
    u: &[f64],
    t_new: f64,
    h: f64,
    gamma: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, Vec<f64>, usize), SolveError> {
    let f_hat_prev = vec![0.0; p.n_diff()];
    let inputs = StepInputs {
        x_prev,
        y_prev,
        f_hat_prev: &f_hat_prev,
        x_prev2: Some(x_prev2),
    };
    scheme_step(p, Scheme::Bdf2 { ratio: 1.0 }, &inputs, u, t_new, h, gamma, cfg)
        .map(|(x, y, _, iters)| (x, y, iters))
}

//! Sparse-system Newton kernel shared by all steppers.

use nalgebra::{DMatrix, DVector};

use super::NewtonConfig;
use crate::error::SolveError;

/// Solve `F(z) = 0` by full Newton with an LU-factorized iteration matrix.
///
/// Convergence is declared on the residual infinity norm, with a saturation
/// rule: once below `tol`, iteration continues while the norm still drops by
/// more than 4x, so the returned point sits at the quadratic-convergence
/// floor rather than somewhere inside the tolerance ball. This keeps runs
/// with different residual scalings (gamma, row scaling) on bitwise-close
/// trajectories.
///
/// Returns the solution and the number of Newton updates taken.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, usize), SolveError>
where
    R: FnMut(&[f64], &mut [f64]) -> Result<(), SolveError>,
    J: FnMut(&[f64], &mut DMatrix<f64>) -> Result<(), SolveError>,
{
    let dim = guess.len();
    let mut z = guess.to_vec();
    if dim == 0 {
        return Ok((z, 0));
    }
    let mut r = vec![0.0; dim];
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let hard_floor = cfg.tol * 1e-3;
    let mut prev_norm = f64::INFINITY;
    let mut iters = 0usize;

    loop {
        residual(&z, &mut r)?;
        let rn = inf_norm(&r);
        if !rn.is_finite() {
            return Err(SolveError::MaxIterExceeded {
                max_iter: iters,
                residual_norm: rn,
            });
        }
        let saturated = rn <= cfg.tol && rn >= 0.25 * prev_norm;
        if rn <= hard_floor || saturated {
            return Ok((z, iters));
        }
        if iters >= cfg.max_iter {
            if rn <= cfg.tol {
                return Ok((z, iters));
            }
            return Err(SolveError::MaxIterExceeded {
                max_iter: cfg.max_iter,
                residual_norm: rn,
            });
        }

        jacobian(&z, &mut a)?;
        let rhs = DVector::from_iterator(dim, r.iter().map(|v| -v));
        let lu = a.clone().lu();
        match lu.solve(&rhs) {
            Some(delta) => {
                for (zi, di) in z.iter_mut().zip(delta.iter()) {
                    *zi += di;
                }
            }
            None => {
                return Err(SolveError::SingularMatrix {
                    pivot_row: worst_pivot_row(&a),
                });
            }
        }
        prev_norm = rn;
        iters += 1;
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Row of the smallest U-diagonal after factorization, reported with
/// singular-matrix errors.
fn worst_pivot_row(a: &DMatrix<f64>) -> usize {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut row = 0;
    let mut min = f64::INFINITY;
    for i in 0..u.nrows().min(u.ncols()) {
        let d = u[(i, i)].abs();
        if d < min {
            min = d;
            row = i;
        }
    }
    row
}

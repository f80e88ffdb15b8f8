//! Step-size adaptation from step-doubling error estimates.

use super::StepController;

/// Decide acceptance and the next step size from a weighted local error.
///
/// `err` is the infinity norm of the step-doubling difference weighted by
/// `atol + rtol * |z|`; the step is accepted when `err <= 1`. The next step
/// is `h * clamp(safety * err^(-1/(order+1)), 0.2, 5)`, clamped to
/// `[hmin, hmax]`.
pub fn estimate_error_and_adapt(
    err: f64,
    h: f64,
    order: usize,
    ctrl: &StepController,
) -> (bool, f64) {
    let accept = err.is_finite() && err <= 1.0;
    let factor = if !err.is_finite() {
        0.2
    } else if err <= 0.0 {
        5.0
    } else {
        let exponent = -1.0 / (order as f64 + 1.0);
        (ctrl.safety * err.powf(exponent)).clamp(0.2, 5.0)
    };
    let h_next = (h * factor).clamp(ctrl.hmin, ctrl.hmax);
    (accept, h_next)
}

/// Weighted infinity norm of the doubling difference `big - fine`.
pub(crate) fn weighted_error(big: &[f64], fine: &[f64], rtol: f64, atol: f64) -> f64 {
    big.iter()
        .zip(fine)
        .fold(0.0f64, |acc, (&b, &f)| {
            let w = atol + rtol * f.abs();
            acc.max((b - f).abs() / w)
        })
}

//! Central-difference gradient checking.

use crate::error::{shape_err, Error, Result};

use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Relative error between an analytic gradient and central differences of
/// `value` at `point`, maximized over coordinates.
///
/// Per coordinate the error is `|a − n| / max(1e-12, |a| + |n|)` where
/// `n = (f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h`.
pub fn relative_gradient_error(
    mut value: impl FnMut(&Tensor) -> Result<f64>,
    point: &Tensor,
    step: f64,
    analytic: &Tensor,
) -> Result<f64> {
    if analytic.shape() != point.shape() {
        return Err(shape_err(
            "finite_diff_check",
            point.shape(),
            analytic.shape(),
        ));
    }
    let mut probe = point.clone();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let x = point.data()[i];
        probe.data_mut()[i] = x + step;
        let plus = value(&probe)?;
        probe.data_mut()[i] = x - step;
        let minus = value(&probe)?;
        probe.data_mut()[i] = x;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "function value at coordinate {i} (f+ = {plus}, f- = {minus})"
            )));
        }
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Checks the tape's gradient of a scalar function against central
/// differences. `f` receives a fresh tape and the leaf holding the point.
pub fn finite_diff_check<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    let grads = tape.backward(y)?;
    let analytic = grads
        .get(x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(point.shape().to_vec()));
    relative_gradient_error(
        |p| {
            let mut tape = Tape::new();
            let x = tape.constant(p.clone());
            let y = f(&mut tape, x)?;
            tape.value(y).item()
        },
        point,
        step,
        &analytic,
    )
}

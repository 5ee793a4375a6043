use crate::error::{Error, Result};

/// Root of an increasing function on `[lo, hi]` by Newton steps safeguarded
/// with bisection. `f` returns `(value, derivative)`; requires
/// `f(lo) <= 0 <= f(hi)`.
pub(crate) fn newton_bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = if start > lo && start < hi {
        start
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..max_iter {
        let (fx, dfx) = f(x);
        if fx.is_nan() {
            return Err(Error::Numeric(format!("root finder hit NaN at {x}")));
        }
        if fx.abs() <= ftol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let step = x - fx / dfx;
        x = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numeric(format!(
        "root bracketing did not converge in {max_iter} iterations (bracket [{lo}, {hi}])"
    )))
}

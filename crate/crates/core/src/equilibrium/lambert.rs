//! Lower real branch of the Lambert W function.

use std::f64::consts::E;

use crate::error::{domain, Result};

const BRANCH_POINT: f64 = -1.0 / E;

/// Evaluates `W₋₁(x)`, the solution `w ≤ -1` of `w·eʷ = x`, for `x ∈ [-1/e, 0)`.
///
/// The starting point is the branch-point series near `-1/e` and the
/// logarithmic asymptote near zero; Halley's iteration then polishes it to
/// machine precision.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !(BRANCH_POINT..0.0).contains(&x) {
        // Rounding can leave -1/e one ulp outside the interval.
        if x.is_nan() || (x - BRANCH_POINT).abs() > 4.0 * f64::EPSILON {
            return Err(domain("lambert_w_minus1", x, "[-1/e, 0)"));
        }
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }

    let mut w = initial_guess(x);
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let next = (w - f / denom).min(-1.0);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * w.abs();
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series in p = -sqrt(2(1 + e·x)) around the branch point.
        let p = -(2.0 * (1.0 + E * x)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

//! Bracketing and bisection for monotone scalar equations.

use crate::error::{Error, Result};

/// Doubles `hi` (starting from `start`) until `g(hi) >= 0`, for `g`
/// nondecreasing with `g(lo) < 0`. Returns the bracket `(lo, hi)`.
pub fn expand_upward<G>(mut g: G, lo: f64, start: f64, limit: f64) -> Result<(f64, f64)>
where
    G: FnMut(f64) -> Result<f64>,
{
    let mut lo = lo;
    let mut hi = start;
    loop {
        let v = g(hi)?;
        if v >= 0.0 {
            return Ok((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
        if !(hi <= limit) {
            return Err(Error::BracketingFailed(format!(
                "objective still negative at {lo:e} (limit {limit:e})"
            )));
        }
    }
}

/// Bisection for a nondecreasing `g` with `g(lo) < 0 <= g(hi)`, run until
/// the bracket width is below `xtol + 4 eps |x|`.
pub fn bisect<G>(mut g: G, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol + 4.0 * f64::EPSILON * mid.abs() || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let v = g(mid)?;
        if v.is_nan() {
            return Err(Error::BracketingFailed(format!("objective is NaN at {mid}")));
        }
        if v >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

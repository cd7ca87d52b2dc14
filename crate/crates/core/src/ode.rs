//! Dormand–Prince 5(4) integration of `z' = w / r`, `w' = q z`, the
//! first-order form of `(r z')' = q z` with `w = r z'`.

use crate::error::{Error, Result};

pub type State = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    /// Steps are capped at `max_step_frac * (1 + |x|)`.
    pub max_step_frac: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-11, max_step_frac: 0.05, max_steps: 2_000_000 }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrates from `(x0, y0)` to `x1` in either direction. `observe` is
/// called after every accepted step with the new point.
pub fn integrate<R, O>(rhs: &R, x0: f64, y0: State, x1: f64, opts: &OdeOptions, mut observe: O) -> Result<State>
where
    R: Fn(f64, &State) -> State,
    O: FnMut(f64, &State) -> Result<()>,
{
    if x0 == x1 {
        return Ok(y0);
    }
    let dir = if x1 > x0 { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut y = y0;
    let mut peak = [y0[0].abs(), y0[1].abs()];
    let mut h = (1e-3 * (1.0 + x0.abs())).min((x1 - x0).abs());
    let mut k1 = rhs(x, &y);
    let mut steps = 0usize;
    while (x1 - x) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::OdeFailed(format!("step budget exhausted at x = {x}")));
        }
        h = h.min(opts.max_step_frac * (1.0 + x.abs())).min((x1 - x).abs());
        let hs = dir * h;
        let k2 = rhs(x + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = rhs(x + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(x + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(x + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(x + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, hs, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(x + hs, &y_new);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.rtol * (y[i].abs().max(y_new[i].abs()) + 1e-9 * peak[i]);
            let scale = if scale > 0.0 { scale } else { f64::MIN_POSITIVE };
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() || !y_new[0].is_finite() || !y_new[1].is_finite() {
            if h < 1e-12 * (1.0 + x.abs()) {
                return Err(Error::OdeFailed(format!("non-finite state near x = {x}")));
            }
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            let reached_end = h >= (x1 - x).abs();
            x = if reached_end { x1 } else { x + hs };
            y = y_new;
            k1 = k7;
            peak[0] = peak[0].max(y[0].abs());
            peak[1] = peak[1].max(y[1].abs());
            observe(x, &y)?;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::OdeFailed(format!("step size underflow at x = {x}")));
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_solutions() {
        // r = 1, q = 1: z = e^x, w = e^x
        let rhs = |_x: f64, y: &State| [y[1], y[0]];
        let y = integrate(&rhs, 0.0, [1.0, 1.0], 5.0, &OdeOptions::default(), |_, _| Ok(())).unwrap();
        assert!((y[0] / 5f64.exp() - 1.0).abs() < 1e-9);
        let y = integrate(&rhs, 0.0, [1.0, -1.0], -5.0, &OdeOptions::default(), |_, _| Ok(())).unwrap();
        assert!((y[0] / 5f64.exp() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_potential_is_linear_in_inv_r() {
        // r = 1 + x^2, q = 0: z(x) = z0 + w0 * (atan x - atan x0)
        let rhs = |x: f64, y: &State| [y[1] / (1.0 + x * x), 0.0];
        let y = integrate(&rhs, -3.0, [2.0, 0.5], 7.0, &OdeOptions::default(), |_, _| Ok(())).unwrap();
        let exact = 2.0 + 0.5 * (7f64.atan() - (-3f64).atan());
        assert!((y[0] - exact).abs() < 1e-10);
        assert_eq!(y[1], 0.5);
    }
}

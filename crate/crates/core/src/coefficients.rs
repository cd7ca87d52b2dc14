//! Coefficient pairs `(r, q)`, their improper integrals, and regime
//! classification.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, ScalarFn, Tolerance};

pub const FINITE_TOL: f64 = 1e-10;
pub const IMPROPER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ternary {
    True,
    False,
    Undetermined,
}

impl Ternary {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Ternary::True
        } else {
            Ternary::False
        }
    }

    pub fn and(self, other: Ternary) -> Ternary {
        match (self, other) {
            (Ternary::False, _) | (_, Ternary::False) => Ternary::False,
            (Ternary::True, Ternary::True) => Ternary::True,
            _ => Ternary::Undetermined,
        }
    }

    pub fn or(self, other: Ternary) -> Ternary {
        match (self, other) {
            (Ternary::True, _) | (_, Ternary::True) => Ternary::True,
            (Ternary::False, Ternary::False) => Ternary::False,
            _ => Ternary::Undetermined,
        }
    }

    pub fn not(self) -> Ternary {
        match self {
            Ternary::True => Ternary::False,
            Ternary::False => Ternary::True,
            Ternary::Undetermined => Ternary::Undetermined,
        }
    }

    pub fn is_true(self) -> bool {
        self == Ternary::True
    }
}

/// Asymptotic law of a coefficient on one tail: `~ |x|^e`, identically
/// zero, or unknown (decided numerically).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailLaw {
    Power(f64),
    Zero,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideTails {
    pub r: TailLaw,
    pub q: TailLaw,
}

/// Where the coefficients stop being sampled data and start following
/// their declared tail laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub x_max: f64,
    pub left: SideTails,
    pub right: SideTails,
}

impl Truncation {
    pub fn symmetric(x_max: f64, r: TailLaw, q: TailLaw) -> Self {
        let side = SideTails { r, q };
        Truncation { x_max, left: side, right: side }
    }

    pub fn unknown(x_max: f64) -> Self {
        Truncation::symmetric(x_max, TailLaw::Unknown, TailLaw::Unknown)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub points: Vec<[f64; 3]>,
    pub interpolation: Interpolation,
    pub r_exponent: f64,
    pub q_exponent: f64,
}

impl Table {
    fn eval(&self, x: f64, col: usize, exponent: f64) -> f64 {
        let pts = &self.points;
        let n = pts.len();
        if x <= pts[0][0] {
            let edge = pts[0];
            return edge[col] * ((1.0 + x.abs()) / (1.0 + edge[0].abs())).powf(exponent);
        }
        if x >= pts[n - 1][0] {
            let edge = pts[n - 1];
            return edge[col] * ((1.0 + x.abs()) / (1.0 + edge[0].abs())).powf(exponent);
        }
        let i = pts.partition_point(|p| p[0] <= x) - 1;
        let (a, b) = (pts[i], pts[i + 1]);
        let theta = (x - a[0]) / (b[0] - a[0]);
        match self.interpolation {
            Interpolation::Log if a[col] > 0.0 && b[col] > 0.0 => {
                (a[col].ln() + theta * (b[col].ln() - a[col].ln())).exp()
            }
            _ => a[col] + theta * (b[col] - a[col]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    PowerLaw { alpha: f64, beta: f64 },
    Constant { r0: f64, q0: f64 },
    Tabulated(Table),
    Composite { name: String },
}

/// The data `(r, q)` of `-(r y')' + q y = f`.
#[derive(Clone)]
pub struct CoefficientPair {
    family: Family,
    r: ScalarFn,
    q: ScalarFn,
    q_zero: bool,
    truncation: Truncation,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for CoefficientPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientPair")
            .field("family", &self.family)
            .field("q_zero", &self.q_zero)
            .field("truncation", &self.truncation)
            .finish()
    }
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCoefficients(format!("{name} must be positive and finite, got {v}")))
    }
}

impl CoefficientPair {
    /// `r = (1 + x²)^α`, `q = (1 + x²)^{-β}` with `α, β > 1/2`.
    pub fn power_law(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.5 && beta.is_finite() && beta > 0.5) {
            return Err(Error::InvalidCoefficients(format!(
                "power law needs alpha, beta > 1/2, got ({alpha}, {beta})"
            )));
        }
        Ok(CoefficientPair {
            family: Family::PowerLaw { alpha, beta },
            r: Arc::new(move |x: f64| (1.0 + x * x).powf(alpha)),
            q: Arc::new(move |x: f64| (1.0 + x * x).powf(-beta)),
            q_zero: false,
            truncation: Truncation::symmetric(0.0, TailLaw::Power(2.0 * alpha), TailLaw::Power(-2.0 * beta)),
            breakpoints: Vec::new(),
        })
    }

    pub fn constant(r0: f64, q0: f64) -> Result<Self> {
        positive_finite("r0", r0)?;
        if !(q0.is_finite() && q0 >= 0.0) {
            return Err(Error::InvalidCoefficients(format!("q0 must be nonnegative, got {q0}")));
        }
        let q_tail = if q0 == 0.0 { TailLaw::Zero } else { TailLaw::Power(0.0) };
        Ok(CoefficientPair {
            family: Family::Constant { r0, q0 },
            r: Arc::new(move |_| r0),
            q: Arc::new(move |_| q0),
            q_zero: q0 == 0.0,
            truncation: Truncation::symmetric(0.0, TailLaw::Power(0.0), q_tail),
            breakpoints: Vec::new(),
        })
    }

    /// Sampled coefficients. Outside the sampled range each column follows
    /// `edge * ((1 + |x|) / (1 + |x_edge|))^exponent`.
    pub fn tabulated(
        points: Vec<[f64; 3]>,
        interpolation: Interpolation,
        r_exponent: f64,
        q_exponent: f64,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCoefficients("a table needs at least two points".into()));
        }
        if !(r_exponent.is_finite() && q_exponent.is_finite()) {
            return Err(Error::InvalidCoefficients("tail exponents must be finite".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p[0].is_finite() {
                return Err(Error::InvalidCoefficients(format!("point {i}: x is not finite")));
            }
            positive_finite(&format!("r at point {i}"), p[1])?;
            if !(p[2].is_finite() && p[2] >= 0.0) {
                return Err(Error::InvalidCoefficients(format!("point {i}: q must be nonnegative")));
            }
            if i > 0 && p[0] <= points[i - 1][0] {
                return Err(Error::InvalidCoefficients("table abscissae must increase strictly".into()));
            }
        }
        let first = points[0];
        let last = points[points.len() - 1];
        let q_law = |edge_q: f64| if edge_q == 0.0 { TailLaw::Zero } else { TailLaw::Power(q_exponent) };
        let truncation = Truncation {
            x_max: first[0].abs().max(last[0].abs()),
            left: SideTails { r: TailLaw::Power(r_exponent), q: q_law(first[2]) },
            right: SideTails { r: TailLaw::Power(r_exponent), q: q_law(last[2]) },
        };
        let q_zero = points.iter().all(|p| p[2] == 0.0);
        let breakpoints = points.iter().map(|p| p[0]).collect();
        let table = Table { points, interpolation, r_exponent, q_exponent };
        let tr = table.clone();
        let tq = table.clone();
        Ok(CoefficientPair {
            family: Family::Tabulated(table),
            r: Arc::new(move |x| tr.eval(x, 1, tr.r_exponent)),
            q: Arc::new(move |x| tq.eval(x, 2, tq.q_exponent)),
            q_zero,
            truncation,
            breakpoints,
        })
    }

    /// Arbitrary closures. `q = None` means `q ≡ 0`. Positivity of `r` and
    /// nonnegativity of `q` are the caller's responsibility.
    pub fn composite(
        name: impl Into<String>,
        r: ScalarFn,
        q: Option<ScalarFn>,
        truncation: Truncation,
        breakpoints: Vec<f64>,
    ) -> Self {
        let q_zero = q.is_none();
        let mut truncation = truncation;
        if q_zero {
            truncation.left.q = TailLaw::Zero;
            truncation.right.q = TailLaw::Zero;
        }
        CoefficientPair {
            family: Family::Composite { name: name.into() },
            r,
            q: q.unwrap_or_else(|| Arc::new(|_| 0.0)),
            q_zero,
            truncation,
            breakpoints,
        }
    }

    /// The model pair: same `r`, `q ≡ 0`.
    pub fn model(&self) -> CoefficientPair {
        if self.q_zero {
            return self.clone();
        }
        let mut truncation = self.truncation;
        truncation.left.q = TailLaw::Zero;
        truncation.right.q = TailLaw::Zero;
        let family = match &self.family {
            Family::Constant { r0, .. } => Family::Constant { r0: *r0, q0: 0.0 },
            _ => Family::Composite { name: "model".into() },
        };
        CoefficientPair {
            family,
            r: self.r.clone(),
            q: Arc::new(|_| 0.0),
            q_zero: true,
            truncation,
            breakpoints: self.breakpoints.clone(),
        }
    }

    pub fn r(&self, x: f64) -> f64 {
        (self.r)(x)
    }

    pub fn q(&self, x: f64) -> f64 {
        (self.q)(x)
    }

    pub fn r_fn(&self) -> ScalarFn {
        self.r.clone()
    }

    pub fn q_fn(&self) -> ScalarFn {
        self.q.clone()
    }

    pub fn inv_r_fn(&self) -> ScalarFn {
        let r = self.r.clone();
        Arc::new(move |x| 1.0 / r(x))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_q_zero(&self) -> bool {
        self.q_zero
    }

    /// Returns `(r0, q0)` for the constant family.
    pub fn as_constant(&self) -> Option<(f64, f64)> {
        match self.family {
            Family::Constant { r0, q0 } => Some((r0, q0)),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)?;
        spec.build()
    }

    pub fn to_spec(&self) -> Option<ProblemSpec> {
        match &self.family {
            Family::PowerLaw { alpha, beta } => Some(ProblemSpec::PowerLaw { alpha: *alpha, beta: *beta }),
            Family::Constant { r0, q0 } => Some(ProblemSpec::Constant { r0: *r0, q0: *q0 }),
            Family::Tabulated(t) => Some(ProblemSpec::Tabulated {
                points: t.points.clone(),
                tail: TailSpec { r_exponent: t.r_exponent, q_exponent: t.q_exponent },
                interpolation: t.interpolation,
            }),
            Family::Composite { .. } => None,
        }
    }

    pub fn integrate_inv_r(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        integrate_inv_r(self, a, b, tol)
    }

    pub fn integrate_q(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        integrate_q(self, a, b, tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub r_exponent: f64,
    pub q_exponent: f64,
}

/// On-disk problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemSpec {
    PowerLaw {
        alpha: f64,
        beta: f64,
    },
    Constant {
        r0: f64,
        q0: f64,
    },
    Tabulated {
        points: Vec<[f64; 3]>,
        tail: TailSpec,
        #[serde(default)]
        interpolation: Interpolation,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<CoefficientPair> {
        match self {
            ProblemSpec::PowerLaw { alpha, beta } => CoefficientPair::power_law(*alpha, *beta),
            ProblemSpec::Constant { r0, q0 } => CoefficientPair::constant(*r0, *q0),
            ProblemSpec::Tabulated { points, tail, interpolation } => {
                CoefficientPair::tabulated(points.clone(), *interpolation, tail.r_exponent, tail.q_exponent)
            }
        }
    }
}

fn check_range(a: f64, b: f64, tol: f64) -> Result<()> {
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::InvalidArgument(format!("need a <= b, got [{a}, {b}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn integrate_coefficient(pair: &CoefficientPair, f: &ScalarFn, constant: Option<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    check_range(a, b, tol)?;
    if a == b {
        return Ok(0.0);
    }
    if let Some(c) = constant {
        if c == 0.0 {
            return Ok(0.0);
        }
        if a.is_finite() && b.is_finite() {
            return Ok((b - a) * c);
        }
        return Err(Error::NonIntegrableTail { a, b });
    }
    let breaks: Vec<f64> = pair.breakpoints.iter().copied().filter(|&t| t > a && t < b).collect();
    quad::integrate_with_breaks(&**f, a, b, &breaks, Tolerance::new(tol, 1e-13)).map(|e| e.value)
}

/// `∫_a^b dt / r(t)` on an extended-real interval.
pub fn integrate_inv_r(pair: &CoefficientPair, a: f64, b: f64, tol: f64) -> Result<f64> {
    let constant = pair.as_constant().map(|(r0, _)| 1.0 / r0);
    integrate_coefficient(pair, &pair.inv_r_fn(), constant, a, b, tol)
}

/// `∫_a^b q(t) dt` on an extended-real interval.
pub fn integrate_q(pair: &CoefficientPair, a: f64, b: f64, tol: f64) -> Result<f64> {
    let constant = if pair.q_zero { Some(0.0) } else { pair.as_constant().map(|(_, q0)| q0) };
    integrate_coefficient(pair, &pair.q, constant, a, b, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrabilityProfile {
    pub inv_r_l1: Ternary,
    pub q_l1: Ternary,
    pub condition_1_3: Ternary,
    pub condition_2_20: Ternary,
    /// `q` has positive mass on both half-lines; enough for a principal
    /// system to exist.
    pub q_mass_both_halves: Ternary,
    /// `∫ dt/r` over the line; `+∞` when not integrable.
    #[serde(serialize_with = "crate::report::serialize_extended")]
    pub w0: f64,
}

enum Side {
    Left,
    Right,
}

/// Window-growth probe: integrable when consecutive doubling windows shrink
/// geometrically, non-integrable when they do not shrink.
fn window_probe(f: &ScalarFn, start: f64, side: Side) -> Ternary {
    let sign = match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
    };
    let mut w = [0.0; 3];
    for (k, slot) in w.iter_mut().enumerate() {
        let lo = start * 2f64.powi(k as i32);
        let hi = 2.0 * lo;
        let g = |t: f64| f(sign * t);
        match quad::integrate_finite(&g, lo, hi, &[], Tolerance::new(0.0, 1e-10)) {
            Ok(e) => *slot = e.value,
            Err(_) => return Ternary::Undetermined,
        }
    }
    if w[0] <= 0.0 {
        return if w.iter().all(|&v| v == 0.0) { Ternary::True } else { Ternary::Undetermined };
    }
    let r1 = w[1] / w[0];
    let r2 = if w[1] > 0.0 { w[2] / w[1] } else { 0.0 };
    if r1 <= 0.9 && r2 <= 0.9 {
        Ternary::True
    } else if r1 >= 0.99 && r2 >= 0.99 {
        Ternary::False
    } else {
        Ternary::Undetermined
    }
}

fn probe_start(pair: &CoefficientPair) -> f64 {
    (pair.truncation.x_max * 2.0).max(1024.0)
}

fn inv_r_integrable(pair: &CoefficientPair, law: TailLaw, side: Side) -> Ternary {
    match law {
        TailLaw::Power(e) => Ternary::from_bool(e > 1.0),
        TailLaw::Zero => Ternary::Undetermined,
        TailLaw::Unknown => window_probe(&pair.inv_r_fn(), probe_start(pair), side),
    }
}

fn q_integrable(pair: &CoefficientPair, law: TailLaw, side: Side) -> Ternary {
    match law {
        TailLaw::Zero => Ternary::True,
        TailLaw::Power(e) => Ternary::from_bool(e < -1.0),
        TailLaw::Unknown => window_probe(&pair.q, probe_start(pair), side),
    }
}

fn q_tail_positive(pair: &CoefficientPair, law: TailLaw, side: Side) -> Ternary {
    match law {
        TailLaw::Zero => Ternary::False,
        TailLaw::Power(_) => Ternary::True,
        TailLaw::Unknown => {
            let sign = match side {
                Side::Left => -1.0,
                Side::Right => 1.0,
            };
            let start = probe_start(pair);
            let positive = (0..24).any(|k| pair.q(sign * start * 2f64.powi(k)) > 0.0);
            if positive {
                Ternary::True
            } else {
                Ternary::Undetermined
            }
        }
    }
}

/// Whether `1/r` is integrable on the right (`right = true`) or left tail.
pub fn inv_r_integrable_on(pair: &CoefficientPair, right: bool) -> Ternary {
    if right {
        inv_r_integrable(pair, pair.truncation.right.r, Side::Right)
    } else {
        inv_r_integrable(pair, pair.truncation.left.r, Side::Left)
    }
}

/// Whether `q` vanishes identically beyond the truncation point on a tail.
pub fn q_vanishes_on(pair: &CoefficientPair, right: bool) -> bool {
    let side = if right { pair.truncation.right } else { pair.truncation.left };
    pair.q_zero || side.q == TailLaw::Zero
}

/// Decides which regime applies, analytically from the tail laws where
/// they are known and by window probing otherwise.
pub fn classify(pair: &CoefficientPair, tol: f64) -> IntegrabilityProfile {
    let t = pair.truncation;
    let inv_left = inv_r_integrable(pair, t.left.r, Side::Left);
    let inv_right = inv_r_integrable(pair, t.right.r, Side::Right);
    let q_left = q_integrable(pair, t.left.q, Side::Left);
    let q_right = q_integrable(pair, t.right.q, Side::Right);
    let pos_left = q_tail_positive(pair, t.left.q, Side::Left);
    let pos_right = q_tail_positive(pair, t.right.q, Side::Right);

    let inv_r_l1 = inv_left.and(inv_right);
    let q_l1 = if pair.q_zero { Ternary::True } else { q_left.and(q_right) };
    // Windowed products blow up on a side iff q keeps positive mass there and
    // at least one of the two windowed integrals is unbounded.
    let side_1_3 = |pos: Ternary, inv: Ternary, q: Ternary| pos.and(inv.not().or(q.not()));
    let condition_1_3 = side_1_3(pos_left, inv_left, q_left).and(side_1_3(pos_right, inv_right, q_right));
    let condition_2_20 = pos_left.and(pos_right);
    let q_mass_both_halves = if condition_2_20.is_true() {
        Ternary::True
    } else if pair.q_zero {
        Ternary::False
    } else {
        let x_max = t.x_max.max(1.0);
        let half = |pos: Ternary, a: f64, b: f64| {
            if pos.is_true() {
                return Ternary::True;
            }
            match integrate_q(pair, a, b, tol) {
                Ok(m) if m > 0.0 => Ternary::True,
                Ok(_) if pos == Ternary::False => Ternary::False,
                _ => Ternary::Undetermined,
            }
        };
        half(pos_left, -x_max, 0.0).and(half(pos_right, 0.0, x_max))
    };
    let w0 = if inv_r_l1.is_true() {
        integrate_inv_r(pair, f64::NEG_INFINITY, f64::INFINITY, tol).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    IntegrabilityProfile { inv_r_l1, q_l1, condition_1_3, condition_2_20, q_mass_both_halves, w0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn power_law_evaluates_exactly() {
        let p = CoefficientPair::power_law(1.5, 0.75).unwrap();
        assert_eq!(p.r(2.0), 5f64.powf(1.5));
        assert_eq!(p.q(2.0), 5f64.powf(-0.75));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CoefficientPair::power_law(0.5, 1.0).is_err());
        assert!(CoefficientPair::constant(0.0, 1.0).is_err());
        assert!(CoefficientPair::constant(1.0, -1.0).is_err());
        assert!(CoefficientPair::tabulated(vec![[0.0, 1.0, 1.0]], Interpolation::Linear, 0.0, 0.0).is_err());
        assert!(CoefficientPair::tabulated(
            vec![[1.0, 1.0, 1.0], [0.0, 1.0, 1.0]],
            Interpolation::Linear,
            0.0,
            0.0
        )
        .is_err());
    }

    #[test]
    fn arctan_totals() {
        let p = CoefficientPair::power_law(1.0, 1.0).unwrap();
        let w = integrate_inv_r(&p, f64::NEG_INFINITY, f64::INFINITY, IMPROPER_TOL).unwrap();
        assert!((w - PI).abs() < 1e-8);
        let m = integrate_q(&p, f64::NEG_INFINITY, f64::INFINITY, IMPROPER_TOL).unwrap();
        assert!((m - PI).abs() < 1e-8);
    }

    #[test]
    fn trivial_ranges() {
        let p = CoefficientPair::power_law(1.0, 1.0).unwrap();
        assert_eq!(integrate_inv_r(&p, 0.0, 0.0, 1e-10).unwrap(), 0.0);
        let c = CoefficientPair::constant(2.0, 1.0).unwrap();
        assert_eq!(integrate_inv_r(&c, 0.0, 4.0, 1e-10).unwrap(), 2.0);
        assert_eq!(integrate_q(&c, -1.0, 1.0, 1e-10).unwrap(), 2.0);
        assert!(matches!(
            integrate_inv_r(&c, 0.0, f64::INFINITY, 1e-8),
            Err(Error::NonIntegrableTail { .. })
        ));
        assert!(integrate_inv_r(&c, 1.0, 0.0, 1e-8).is_err());
    }

    #[test]
    fn power_tail_against_brute_force() {
        let p = CoefficientPair::power_law(1.0, 0.75).unwrap();
        let value = integrate_q(&p, 0.0, f64::INFINITY, IMPROPER_TOL).unwrap();
        // composite Simpson on a log grid up to 1e6, then the analytic tail
        // of (1 + t²)^{-3/4} ≈ t^{-3/2} (1 - 3/(4t²)).
        let n = 400_000;
        let (lo, hi) = (0.0f64, (1e6f64 + 1.0).ln());
        let h = (hi - lo) / n as f64;
        let g = |y: f64| {
            let t = y.exp_m1();
            (1.0 + t * t).powf(-0.75) * y.exp()
        };
        let mut s = g(lo) + g(hi);
        for i in 1..n {
            s += g(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let brute = s * h / 3.0;
        let t = 1e6f64;
        let tail = 2.0 * t.powf(-0.5) - 0.75 * 2.0 / 5.0 * t.powf(-2.5);
        assert!((value - (brute + tail)).abs() < 1e-7, "{value} vs {}", brute + tail);
    }

    #[test]
    fn classification_fast_paths() {
        let p = classify(&CoefficientPair::power_law(1.0, 1.0).unwrap(), IMPROPER_TOL);
        assert_eq!(p.inv_r_l1, Ternary::True);
        assert_eq!(p.q_l1, Ternary::True);
        assert_eq!(p.condition_1_3, Ternary::False);
        assert_eq!(p.condition_2_20, Ternary::True);
        assert!((p.w0 - PI).abs() < 1e-8);

        let c = classify(&CoefficientPair::constant(1.0, 1.0).unwrap(), IMPROPER_TOL);
        assert_eq!(c.condition_1_3, Ternary::True);
        assert_eq!(c.inv_r_l1, Ternary::False);
        assert!(c.w0.is_infinite());

        let z = classify(&CoefficientPair::constant(1.0, 0.0).unwrap(), IMPROPER_TOL);
        assert_eq!(z.condition_2_20, Ternary::False);
        assert_eq!(z.q_l1, Ternary::True);
    }

    #[test]
    fn numeric_classification() {
        let pair = CoefficientPair::composite(
            "lorentz",
            Arc::new(|_| 1.0),
            Some(Arc::new(|x: f64| 1.0 / (1.0 + x * x))),
            Truncation::unknown(0.0),
            vec![],
        );
        let p = classify(&pair, IMPROPER_TOL);
        assert_eq!(p.inv_r_l1, Ternary::False);
        assert_eq!(p.q_l1, Ternary::True);
        assert_eq!(p.condition_1_3, Ternary::True);
        assert_eq!(p.condition_2_20, Ternary::True);
    }

    #[test]
    fn compact_bump_classification() {
        let pair = CoefficientPair::composite(
            "bump",
            Arc::new(|_| 1.0),
            Some(Arc::new(|x: f64| if x.abs() < 1.0 { 1.0 - x * x } else { 0.0 })),
            Truncation::symmetric(1.0, TailLaw::Power(0.0), TailLaw::Zero),
            vec![-1.0, 1.0],
        );
        let p = classify(&pair, IMPROPER_TOL);
        assert_eq!(p.condition_2_20, Ternary::False);
        assert_eq!(p.condition_1_3, Ternary::False);
        assert_eq!(p.q_mass_both_halves, Ternary::True);
    }

    #[test]
    fn tabulated_tails_and_json() {
        let text = r#"{"family":"tabulated","points":[[-1,2,1],[0,1,1],[1,2,0.5]],"tail":{"r_exponent":2.0,"q_exponent":-2.0}}"#;
        let p = CoefficientPair::from_json(text).unwrap();
        assert_eq!(p.r(0.5), 1.5);
        assert!((p.r(3.0) - 2.0 * 4.0).abs() < 1e-12);
        assert!((p.q(-3.0) - 0.25).abs() < 1e-12);
        let prof = classify(&p, IMPROPER_TOL);
        assert_eq!(prof.inv_r_l1, Ternary::True);
        let spec = p.to_spec().unwrap();
        assert_eq!(spec.build().unwrap().r(0.25), p.r(0.25));
    }

    #[test]
    fn json_families() {
        let p = CoefficientPair::from_json(r#"{"family":"power_law","alpha":1.0,"beta":1.0}"#).unwrap();
        assert_eq!(p.family(), &Family::PowerLaw { alpha: 1.0, beta: 1.0 });
        assert!(CoefficientPair::from_json(r#"{"family":"power_law","alpha":0.2,"beta":1.0}"#).is_err());
        assert!(CoefficientPair::from_json(r#"{"family":"tabulated","points":[[0,1,1],[1,1,1]]}"#).is_err());
    }
}

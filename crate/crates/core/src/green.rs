//! The Green kernel `G(x, t) = u(max(x, t)) v(min(x, t))`, its split
//! operators `G1` (integration to the left of `x`) and `G2` (to the right),
//! and estimates of their norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pfss::PrincipalSystem;
use crate::quad::{self, Tolerance};
use crate::report::{self, serialize_extended, serialize_extended_opt};
use crate::trend::{sup_trend, Trend, TrendPolicy};

/// Tolerance for rows of the kernel applied to a right-hand side.
pub const ROW_TOL: Tolerance = Tolerance::new(1e-14, 1e-12);
/// Tolerance for outer integrals (norms, masses).
pub const OUTER_TOL: Tolerance = Tolerance::new(1e-13, 1e-9);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Operator {
    /// `G = G1 + G2`.
    Full,
    /// `(G1 f)(x) = u(x) ∫_{-∞}^x v f`.
    Lower,
    /// `(G2 f)(x) = v(x) ∫_x^∞ u f`.
    Upper,
}

#[derive(Debug, Clone)]
pub struct GreenKernel {
    sys: PrincipalSystem,
}

impl GreenKernel {
    pub fn new(sys: &PrincipalSystem) -> Self {
        GreenKernel { sys: sys.clone() }
    }

    pub fn sys(&self) -> &PrincipalSystem {
        &self.sys
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.sys.kernel(x, t)
    }

    /// `√(ρ(x)ρ(t)) exp(-½ |∫_t^x dξ/(rρ)|)`, with the integral taken by
    /// quadrature rather than from `u` and `v`.
    pub fn eval_dh(&self, x: f64, t: f64) -> Result<f64> {
        let pair = self.sys.pair();
        let g = |xi: f64| 1.0 / (pair.r(xi) * self.sys.rho(xi));
        let lam = quad::integrate_with_breaks(&g, t.min(x), t.max(x), pair.breakpoints(), ROW_TOL)?.value;
        Ok((self.sys.rho(x) * self.sys.rho(t)).sqrt() * (-0.5 * lam).exp())
    }

    /// `∫ g(t) dt` over `[x, ∞)` (`right`) or `(-∞, x]`, clipped to the
    /// domain of the system, in the variable `τ = |t - x|`.
    fn outward(&self, x: f64, right: bool, g: &dyn Fn(f64) -> f64, tol: Tolerance) -> Result<f64> {
        let (lo, hi) = self.sys.domain();
        let sign = if right { 1.0 } else { -1.0 };
        let len = if right { hi - x } else { x - lo };
        let breaks: Vec<f64> =
            self.sys.pair().breakpoints().iter().map(|&b| sign * (b - x)).filter(|&tau| tau > 0.0).collect();
        let f = |tau: f64| g(x + sign * tau);
        Ok(quad::integrate_outward(&f, len, &breaks, tol)?.value)
    }

    /// `∫_{-∞}^x (v(t)/v(x))^p dt`.
    fn left_v_power(&self, x: f64, p: f64) -> Result<f64> {
        self.outward(x, false, &|t| self.sys.v_ratio(t, x).powf(p), OUTER_TOL)
    }

    /// `∫_x^∞ (u(t)/u(x))^p dt`.
    fn right_u_power(&self, x: f64, p: f64) -> Result<f64> {
        self.outward(x, true, &|t| self.sys.u_ratio(t, x).powf(p), OUTER_TOL)
    }

    /// `∫ G(x, t) dx`, which by symmetry is the mass of column `t`.
    pub fn column_mass(&self, t: f64) -> Result<f64> {
        self.sys.check_domain(t)?;
        let right = self.right_u_power(t, 1.0)?;
        let left = self.left_v_power(t, 1.0)?;
        Ok(self.sys.rho(t) * (left + right))
    }

    /// `∫ q(t) G(x, t) dt`.
    pub fn potential_mass(&self, x: f64) -> Result<f64> {
        self.sys.check_domain(x)?;
        let pair = self.sys.pair();
        let right = self.outward(x, true, &|t| pair.q(t) * self.sys.u_ratio(t, x), OUTER_TOL)?;
        let left = self.outward(x, false, &|t| pair.q(t) * self.sys.v_ratio(t, x), OUTER_TOL)?;
        Ok(self.sys.rho(x) * (left + right))
    }

    /// Rows `t, G(x0, t)`.
    pub fn slice(&self, x0: f64, ts: &[f64]) -> Vec<Vec<f64>> {
        ts.iter().map(|&t| vec![t, self.eval(x0, t)]).collect()
    }

    pub fn slice_csv(&self, x0: f64, ts: &[f64]) -> String {
        report::csv_string("t,G(x0,t)", &self.slice(x0, ts))
    }
}

pub fn green_eval(kernel: &GreenKernel, x: f64, t: f64) -> f64 {
    kernel.eval(x, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Bump {
    fn eval(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.width;
        if z.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - z * z).powi(2)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum RhsKind {
    Zero,
    Gaussian,
    Indicator(f64, f64),
    Bumps(Vec<Bump>),
    Table(Vec<(f64, f64)>),
}

/// A right-hand side with compact (effective) support.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    kind: RhsKind,
    support: (f64, f64),
    breaks: Vec<f64>,
}

/// Beyond this radius `e^{-t²/2}` is below the smallest subnormal.
const GAUSSIAN_RADIUS: f64 = 40.0;

impl Rhs {
    pub fn zero() -> Self {
        Rhs { kind: RhsKind::Zero, support: (0.0, 0.0), breaks: vec![] }
    }

    /// `e^{-t²/2}`.
    pub fn gaussian() -> Self {
        Rhs {
            kind: RhsKind::Gaussian,
            support: (-GAUSSIAN_RADIUS, GAUSSIAN_RADIUS),
            breaks: vec![-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0],
        }
    }

    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("indicator needs a finite a < b, got [{a}, {b}]")));
        }
        Ok(Rhs { kind: RhsKind::Indicator(a, b), support: (a, b), breaks: vec![] })
    }

    pub fn bumps(bumps: Vec<Bump>) -> Result<Self> {
        if bumps.is_empty() {
            return Ok(Rhs::zero());
        }
        if bumps.iter().any(|b| !(b.width > 0.0 && b.center.is_finite() && b.amplitude.is_finite())) {
            return Err(Error::InvalidArgument("bumps need positive widths and finite data".into()));
        }
        let lo = bumps.iter().map(|b| b.center - b.width).fold(f64::INFINITY, f64::min);
        let hi = bumps.iter().map(|b| b.center + b.width).fold(f64::NEG_INFINITY, f64::max);
        let mut breaks: Vec<f64> = bumps.iter().flat_map(|b| [b.center - b.width, b.center, b.center + b.width]).collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Ok(Rhs { kind: RhsKind::Bumps(bumps), support: (lo, hi), breaks })
    }

    /// Piecewise linear through `(t, f)` points, zero outside them.
    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.len() < 2 || points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(Error::InvalidArgument("a tabulated right-hand side needs two or more finite points".into()));
        }
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument("duplicate abscissa in right-hand side".into()));
        }
        let support = (points[0].0, points[points.len() - 1].0);
        let breaks = points.iter().map(|p| p.0).collect();
        Ok(Rhs { kind: RhsKind::Table(points), support, breaks })
    }

    /// Reads `t,f` rows; a header line and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed = (cols.len() == 2).then(|| (cols[0].parse::<f64>(), cols[1].parse::<f64>()));
            match parsed {
                Some((Ok(t), Ok(f))) => points.push((t, f)),
                _ if i == 0 && points.is_empty() => continue,
                _ => return Err(Error::Parse(format!("line {}: expected `t,f`", i + 1))),
            }
        }
        Rhs::table(points)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            RhsKind::Zero => 0.0,
            RhsKind::Gaussian => (-0.5 * t * t).exp(),
            RhsKind::Indicator(a, b) => {
                if t >= *a && t <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            RhsKind::Bumps(bs) => bs.iter().map(|b| b.eval(t)).sum(),
            RhsKind::Table(pts) => {
                if t < pts[0].0 || t > pts[pts.len() - 1].0 {
                    return 0.0;
                }
                let i = pts.partition_point(|p| p.0 <= t).clamp(1, pts.len() - 1);
                let (a, b) = (pts[i - 1], pts[i]);
                a.1 + (t - a.0) / (b.0 - a.0) * (b.1 - a.1)
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, RhsKind::Zero)
    }

    /// `‖f‖_p`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let (a, b) = self.support;
        let g = |t: f64| self.eval(t).abs().powf(p);
        Ok(quad::integrate_finite(&g, a, b, &self.breaks, OUTER_TOL)?.value.powf(1.0 / p))
    }
}

/// `(G1 f)(x)` and `(G2 f)(x)`.
pub fn apply_split(kernel: &GreenKernel, f: &Rhs, x: f64, tol: Tolerance) -> Result<(f64, f64)> {
    let sys = &kernel.sys;
    sys.check_domain(x)?;
    if f.is_zero() {
        return Ok((0.0, 0.0));
    }
    let (a, b) = f.support;
    if !(sys.contains(a) && sys.contains(b)) {
        return Err(Error::OutsideDomain { x: if sys.contains(a) { b } else { a }, lo: sys.domain().0, hi: sys.domain().1 });
    }
    let mut breaks = f.breaks.clone();
    breaks.extend_from_slice(sys.pair().breakpoints());
    let row = |est: Result<quad::Estimate>| est.map(|e| e.value).map_err(|_| Error::NonConvergentRow { x });
    let closed = sys.is_closed_form();
    let g1 = if x > a {
        let hi = x.min(b);
        if closed {
            row(quad::integrate_finite(&|t: f64| sys.kernel(x, t) * f.eval(t), a, hi, &breaks, tol))?
        } else {
            sys.u(x) * row(quad::integrate_finite(&|t: f64| sys.v(t) * f.eval(t), a, hi, &breaks, tol))?
        }
    } else {
        0.0
    };
    let g2 = if x < b {
        let lo = x.max(a);
        if closed {
            row(quad::integrate_finite(&|t: f64| sys.kernel(x, t) * f.eval(t), lo, b, &breaks, tol))?
        } else {
            sys.v(x) * row(quad::integrate_finite(&|t: f64| sys.u(t) * f.eval(t), lo, b, &breaks, tol))?
        }
    } else {
        0.0
    };
    Ok((g1, g2))
}

/// `y(x) = (G f)(x)`.
pub fn apply_green(kernel: &GreenKernel, f: &Rhs, x: f64, tol: Tolerance) -> Result<f64> {
    let (g1, g2) = apply_split(kernel, f, x, tol)?;
    Ok(g1 + g2)
}

/// `-(r y')' + q y - f` at `x` by central differences of step `h`.
pub fn fd_residual(kernel: &GreenKernel, f: &Rhs, x: f64, h: f64) -> Result<f64> {
    let pair = kernel.sys.pair();
    let y = |t: f64| apply_green(kernel, f, t, ROW_TOL);
    let (ym, y0, yp) = (y(x - h)?, y(x)?, y(x + h)?);
    let flux = pair.r(x + 0.5 * h) * (yp - y0) - pair.r(x - 0.5 * h) * (y0 - ym);
    Ok(-flux / (h * h) + pair.q(x) * y0 - f.eval(x))
}

/// `‖K f‖_p` for one of the three operators.
pub fn output_norm(kernel: &GreenKernel, f: &Rhs, op: Operator, p: f64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let sys = &kernel.sys;
    let (a, b) = f.support;
    let part = |x: f64| -> f64 {
        match apply_split(kernel, f, x, ROW_TOL) {
            Ok((g1, g2)) => match op {
                Operator::Full => g1 + g2,
                Operator::Lower => g1,
                Operator::Upper => g2,
            }
            .abs()
            .powf(p),
            Err(_) => f64::NAN,
        }
    };
    let mut breaks = f.breaks.clone();
    breaks.extend_from_slice(sys.pair().breakpoints());
    let inside = quad::integrate_finite(&part, a, b, &breaks, OUTER_TOL)?.value;
    // Outside the support, G f is a multiple of v on the left and of u on
    // the right.
    let mut total = inside;
    if op != Operator::Lower {
        let c2 = apply_split(kernel, f, a, ROW_TOL)?.1;
        if c2 != 0.0 {
            total += c2.abs().powf(p) * kernel.left_v_power(a, p).unwrap_or(f64::INFINITY);
        }
    }
    if op != Operator::Upper {
        let c1 = apply_split(kernel, f, b, ROW_TOL)?.0;
        if c1 != 0.0 {
            total += c1.abs().powf(p) * kernel.right_u_power(b, p).unwrap_or(f64::INFINITY);
        }
    }
    Ok(total.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormMethod {
    HardyBound,
    L1Exact,
    EmpiricalProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub p: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub upper: f64,
    pub method: NormMethod,
    #[serde(rename = "H_plus", serialize_with = "serialize_extended_opt")]
    pub h_plus: Option<f64>,
    #[serde(rename = "H_minus", serialize_with = "serialize_extended_opt")]
    pub h_minus: Option<f64>,
    pub trend: Option<Trend>,
}

impl NormEstimate {
    /// Whether the estimate certifies an unbounded operator.
    pub fn is_divergent(&self) -> bool {
        self.trend.as_ref().is_some_and(Trend::is_growing)
    }
}

/// `sup_t ∫ G(x, t) dx`, the norm of `G` on `L_1`.
pub fn l1_norm(kernel: &GreenKernel, policy: &TrendPolicy) -> NormEstimate {
    let rec = sup_trend(policy, |t| match kernel.column_mass(t) {
        Err(Error::NonIntegrableTail { .. }) => Ok(f64::INFINITY),
        other => other,
    });
    let (lower, upper) = match &rec.trend {
        Trend::Stable { value, .. } => (*value, *value),
        t => (t.last(), f64::INFINITY),
    };
    NormEstimate {
        p: 1.0,
        lower,
        upper,
        method: NormMethod::L1Exact,
        h_plus: None,
        h_minus: None,
        trend: Some(rec.trend),
    }
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `p^{1/p} (p')^{1/p'}`.
pub fn hardy_constant(p: f64) -> f64 {
    let q = conjugate(p);
    p.powf(1.0 / p) * q.powf(1.0 / q)
}

/// `H⁺(x) = (∫_{-∞}^x v^p)^{1/p} (∫_x^∞ u^{p'})^{1/p'}`, the Hardy
/// functional of `G2`.
pub fn hardy_plus(kernel: &GreenKernel, p: f64, x: f64) -> Result<f64> {
    kernel.sys.check_domain(x)?;
    let q = conjugate(p);
    let a = kernel.left_v_power(x, p)?;
    let b = kernel.right_u_power(x, q)?;
    Ok(kernel.sys.rho(x) * a.powf(1.0 / p) * b.powf(1.0 / q))
}

/// `H⁻(x) = (∫_x^∞ u^p)^{1/p} (∫_{-∞}^x v^{p'})^{1/p'}`, the Hardy
/// functional of `G1`.
pub fn hardy_minus(kernel: &GreenKernel, p: f64, x: f64) -> Result<f64> {
    kernel.sys.check_domain(x)?;
    let q = conjugate(p);
    let a = kernel.right_u_power(x, p)?;
    let b = kernel.left_v_power(x, q)?;
    Ok(kernel.sys.rho(x) * a.powf(1.0 / p) * b.powf(1.0 / q))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyReport {
    pub g1: NormEstimate,
    pub g2: NormEstimate,
}

/// Two-sided brackets `[H, c_p H]` for the norms of `G1` and `G2` on `L_p`.
pub fn hardy_bounds(kernel: &GreenKernel, p: f64, policy: &TrendPolicy) -> Result<HardyReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("Hardy bounds need 1 < p < ∞, got {p}")));
    }
    let divergent_as_inf = |r: Result<f64>| match r {
        Err(Error::NonIntegrableTail { .. }) => Ok(f64::INFINITY),
        other => other,
    };
    let plus = sup_trend(policy, |x| divergent_as_inf(hardy_plus(kernel, p, x)));
    let minus = sup_trend(policy, |x| divergent_as_inf(hardy_minus(kernel, p, x)));
    let c = hardy_constant(p);
    let value = |t: &Trend| t.value();
    let estimate = |t: &Trend| {
        let (lower, upper) = match t {
            Trend::Stable { value, .. } => (*value, c * value),
            t => (t.last(), f64::INFINITY),
        };
        NormEstimate {
            p,
            lower,
            upper,
            method: NormMethod::HardyBound,
            h_plus: value(&plus.trend),
            h_minus: value(&minus.trend),
            trend: Some(t.clone()),
        }
    };
    Ok(HardyReport { g1: estimate(&minus.trend), g2: estimate(&plus.trend) })
}

/// Non-negative combinations of one to three bumps with centers in
/// `[-5, 5]` and widths in `[0.2, 8]`.
pub fn random_probes(seed: u64, n: usize) -> Vec<Rhs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=3);
            let bumps = (0..k)
                .map(|_| Bump {
                    center: rng.gen_range(-5.0..=5.0),
                    width: rng.gen_range(0.2..=8.0),
                    amplitude: rng.gen_range(0.2..=2.0),
                })
                .collect();
            Rhs::bumps(bumps).expect("generated bumps are valid")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub estimate: NormEstimate,
    /// `‖K f‖_p / ‖f‖_p` per probe, `None` for skipped zero probes.
    pub ratios: Vec<Option<f64>>,
}

/// `max ‖K f‖_p / ‖f‖_p` over the probes, a lower bound for `‖K‖`.
pub fn empirical_norm_probe(kernel: &GreenKernel, p: f64, op: Operator, probes: &[Rhs]) -> Result<ProbeReport> {
    let ratios: Vec<Result<Option<f64>>> = probes
        .par_iter()
        .map(|f| {
            let nf = f.lp_norm(p)?;
            if !(nf > 0.0) {
                return Ok(None);
            }
            Ok(Some(output_norm(kernel, f, op, p)? / nf))
        })
        .collect();
    let ratios: Vec<Option<f64>> = ratios.into_iter().collect::<Result<_>>()?;
    let best = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(ProbeReport {
        estimate: NormEstimate {
            p,
            lower: best,
            upper: f64::INFINITY,
            method: NormMethod::EmpiricalProbe,
            h_plus: None,
            h_minus: None,
            trend: None,
        },
        ratios,
    })
}

/// Rows `p,lower,upper,method`.
pub fn norm_table_csv(estimates: &[NormEstimate]) -> String {
    let mut out = String::from("p,lower,upper,method\n");
    for e in estimates {
        out.push_str(&format!(
            "{},{},{},{:?}\n",
            report::fmt_float(e.p),
            report::fmt_float(e.lower),
            report::fmt_float(e.upper),
            e.method
        ));
    }
    out
}

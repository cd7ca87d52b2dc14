//! Principal fundamental systems `{u, v}` of `(r z')' = q z`.
//!
//! Three constructions are available: closed form for constant
//! coefficients, the explicit model system when `q ≡ 0` and `1/r` is
//! integrable, and asymptotic matching, where `u` is integrated from the
//! right tail and `v` from the left tail, each in its own stable direction.
//!
//! `∫_a^b dt/(rρ)` is evaluated through the identity
//! `(ln(v/u))' = 1/(rρ)`, as a logarithm of a cross product of the four
//! values `u(a), v(a), u(b), v(b)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coefficients::{self, classify, CoefficientPair, Ternary};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, State};
use crate::quad::{self, Cumulative, ScalarFn, Tolerance};
use crate::roots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    ExplicitModel,
    ConstantClosedForm,
    AsymptoticMatching,
}

#[derive(Debug, Clone, Copy)]
pub struct PfssOptions {
    /// Largest `|x|` at which the system will be evaluated.
    pub extent: f64,
    /// Bound on the tail remainder used to place the matching cutoff.
    pub match_tol: f64,
    pub ode: OdeOptions,
    pub max_cutoff: f64,
}

impl Default for PfssOptions {
    fn default() -> Self {
        PfssOptions { extent: 2f64.powi(21), match_tol: 1e-8, ode: OdeOptions::default(), max_cutoff: 1e14 }
    }
}

#[derive(Debug, Clone)]
struct Trajectory {
    xs: Vec<f64>,
    ys: Vec<State>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TailData {
    /// Recessive direction `(∫_X^∞ dt/r, -1)` up to normalization.
    Integrable,
    /// `q ≡ 0` beyond the cutoff and `1/r` not integrable: `(1, 0)`.
    Flat,
    /// Dirichlet limit `(0, -1)`.
    Dirichlet,
}

struct Matched {
    pair: CoefficientPair,
    ode: OdeOptions,
    u: Trajectory,
    v: Trajectory,
    lo: f64,
    hi: f64,
    continue_left: bool,
    continue_right: bool,
}

enum Repr {
    Constant { m: f64, r0: f64, norm: f64 },
    Model { cum: Cumulative, sqrt_w0: f64 },
    Matched(Box<Matched>),
}

/// A constructed principal system together with the pair it solves.
#[derive(Clone)]
pub struct PrincipalSystem {
    pair: CoefficientPair,
    repr: Arc<Repr>,
    su: f64,
    sv: f64,
    x0: f64,
    method: Method,
    domain: (f64, f64),
    quality: Option<PfssQuality>,
    notes: Vec<String>,
}

impl std::fmt::Debug for PrincipalSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrincipalSystem")
            .field("method", &self.method)
            .field("x0", &self.x0)
            .field("domain", &self.domain)
            .field("scales", &(self.su, self.sv))
            .finish()
    }
}

impl Trajectory {
    fn eval(&self, rhs: &impl Fn(f64, &State) -> State, opts: &OdeOptions, x: f64) -> State {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&t| t <= x).saturating_sub(1).min(n - 1);
        if self.xs[i] == x {
            return self.ys[i];
        }
        let fine = OdeOptions { rtol: opts.rtol * 0.1, ..*opts };
        ode::integrate(rhs, self.xs[i], self.ys[i], x, &fine, |_, _| Ok(())).unwrap_or([f64::NAN; 2])
    }
}

impl Matched {
    fn rhs(&self) -> impl Fn(f64, &State) -> State + '_ {
        let r = self.pair.r_fn();
        let q = self.pair.q_fn();
        move |x: f64, y: &State| [y[1] / r(x), q(x) * y[0]]
    }

    fn eval(&self, which: &Trajectory, x: f64) -> State {
        if x >= self.lo && x <= self.hi {
            return which.eval(&self.rhs(), &self.ode, x);
        }
        let (edge, ok) = if x > self.hi {
            (self.hi, self.continue_right)
        } else {
            (self.lo, self.continue_left)
        };
        if !ok {
            return [f64::NAN; 2];
        }
        let y = which.eval(&self.rhs(), &self.ode, edge);
        let (a, b) = if x > edge { (edge, x) } else { (x, edge) };
        let mass = coefficients::integrate_inv_r(&self.pair, a, b, 1e-300).unwrap_or(f64::NAN);
        let mass = if x > edge { mass } else { -mass };
        [y[0] + y[1] * mass, y[1]]
    }
}

impl PrincipalSystem {
    fn base_u(&self, x: f64) -> State {
        match &*self.repr {
            Repr::Constant { m, r0, norm } => {
                let u = norm * (-m * x).exp();
                [u, -m * r0 * u]
            }
            Repr::Model { cum, sqrt_w0 } => [cum.above(x) / sqrt_w0, -1.0 / sqrt_w0],
            Repr::Matched(mt) => {
                if !self.contains(x) {
                    return [f64::NAN; 2];
                }
                mt.eval(&mt.u, x)
            }
        }
    }

    fn base_v(&self, x: f64) -> State {
        match &*self.repr {
            Repr::Constant { m, r0, norm } => {
                let v = norm * (m * x).exp();
                [v, m * r0 * v]
            }
            Repr::Model { cum, sqrt_w0 } => [cum.below(x) / sqrt_w0, 1.0 / sqrt_w0],
            Repr::Matched(mt) => {
                if !self.contains(x) {
                    return [f64::NAN; 2];
                }
                mt.eval(&mt.v, x)
            }
        }
    }

    /// `(u, r u')` at `x`.
    pub fn u_state(&self, x: f64) -> State {
        let b = self.base_u(x);
        [self.su * b[0], self.su * b[1]]
    }

    /// `(v, r v')` at `x`.
    pub fn v_state(&self, x: f64) -> State {
        let b = self.base_v(x);
        [self.sv * b[0], self.sv * b[1]]
    }

    pub fn u(&self, x: f64) -> f64 {
        self.u_state(x)[0]
    }

    pub fn v(&self, x: f64) -> f64 {
        self.v_state(x)[0]
    }

    pub fn rho(&self, x: f64) -> f64 {
        if let Repr::Constant { m, r0, .. } = &*self.repr {
            return (self.su * self.sv) / (2.0 * m * r0);
        }
        self.u(x) * self.v(x)
    }

    /// `u(max(x, t)) v(min(x, t))`.
    pub fn kernel(&self, x: f64, t: f64) -> f64 {
        if let Repr::Constant { m, r0, .. } = &*self.repr {
            return (self.su * self.sv) / (2.0 * m * r0) * (-m * (x - t).abs()).exp();
        }
        let (lo, hi) = if x <= t { (x, t) } else { (t, x) };
        self.u(hi) * self.v(lo)
    }

    /// `u(t) / u(x)`, free of overflow for constant coefficients.
    pub fn u_ratio(&self, t: f64, x: f64) -> f64 {
        if let Repr::Constant { m, .. } = &*self.repr {
            return (-m * (t - x)).exp();
        }
        self.u(t) / self.u(x)
    }

    /// `v(t) / v(x)`, free of overflow for constant coefficients.
    pub fn v_ratio(&self, t: f64, x: f64) -> f64 {
        if let Repr::Constant { m, .. } = &*self.repr {
            return (m * (t - x)).exp();
        }
        self.v(t) / self.v(x)
    }

    /// `r (v' u - u' v)`.
    pub fn wronskian(&self, x: f64) -> f64 {
        let u = self.u_state(x);
        let v = self.v_state(x);
        v[1] * u[0] - u[1] * v[0]
    }

    /// `ln(v(x)/u(x))`.
    pub fn log_ratio(&self, x: f64) -> f64 {
        if let Repr::Constant { m, .. } = &*self.repr {
            return 2.0 * m * x + (self.sv / self.su).ln();
        }
        (self.v(x) / self.u(x)).ln()
    }

    /// `∫_a^b dt / (r ρ)`.
    pub fn inv_r_rho_integral(&self, a: f64, b: f64) -> f64 {
        if let Repr::Constant { m, .. } = &*self.repr {
            return 2.0 * m * (b - a);
        }
        if a == b {
            return 0.0;
        }
        let (ua, va) = (self.u(a), self.v(a));
        let (ub, vb) = (self.u(b), self.v(b));
        ((vb * ua) / (ub * va)).ln()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// Whether `u` and `v` are exponentials in closed form.
    pub fn is_closed_form(&self) -> bool {
        matches!(&*self.repr, Repr::Constant { .. })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn pair(&self) -> &CoefficientPair {
        &self.pair
    }

    /// Interval on which `u` and `v` are available.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x, lo: self.domain.0, hi: self.domain.1 })
        }
    }

    pub fn quality(&self) -> Option<&PfssQuality> {
        self.quality.as_ref()
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// The system `(a u, v / a)`.
    pub fn rescaled(&self, a: f64) -> PrincipalSystem {
        let mut s = self.clone();
        s.su *= a;
        s.sv /= a;
        s
    }

    /// The system `(k u, v)`; breaks the unit Wronskian for `k ≠ 1`.
    pub fn with_u_scaled(&self, k: f64) -> PrincipalSystem {
        let mut s = self.clone();
        s.su *= k;
        s
    }

    pub fn scales(&self) -> (f64, f64) {
        (self.su, self.sv)
    }

    /// Rows `x, u, v, rho` for the CSV dump.
    pub fn table(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        grid.iter().map(|&x| vec![x, self.u(x), self.v(x), self.rho(x)]).collect()
    }
}

fn finish(mut sys: PrincipalSystem) -> Result<PrincipalSystem> {
    sys.x0 = locate_x0(&sys)?;
    let grid = default_grid(&sys, 20);
    sys.quality = Some(verify_pfss(&sys, &grid));
    Ok(sys)
}

/// Grid of `0, ±2^k` clipped to the domain and to `2^k_max`.
pub fn default_grid(sys: &PrincipalSystem, k_max: i32) -> Vec<f64> {
    let mut g = vec![0.0];
    for k in -3..=k_max {
        let x = 2f64.powi(k);
        if sys.contains(x) {
            g.push(x);
        }
        if sys.contains(-x) {
            g.push(-x);
        }
    }
    g.sort_by(f64::total_cmp);
    g
}

fn locate_x0(sys: &PrincipalSystem) -> Result<f64> {
    if let Repr::Constant { m, .. } = &*sys.repr {
        return Ok((sys.su / sys.sv).ln() / (2.0 * m));
    }
    let g = |x: f64| -> Result<f64> {
        let v = sys.log_ratio(x);
        if v.is_nan() {
            Err(Error::BracketingFailed(format!("ln(v/u) undefined at {x}")))
        } else {
            Ok(v)
        }
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    while g(lo)? > 0.0 {
        lo *= 2.0;
        if !sys.contains(lo) {
            return Err(Error::BracketingFailed("u = v has no root on the left".into()));
        }
    }
    while g(hi)? < 0.0 {
        hi *= 2.0;
        if !sys.contains(hi) {
            return Err(Error::BracketingFailed("u = v has no root on the right".into()));
        }
    }
    roots::bisect(g, lo, hi, 1e-10)
}

/// The explicit system of the model equation `(r z')' = 0`:
/// `u = w0^{-1/2} ∫_x^∞ dt/r`, `v = w0^{-1/2} ∫_{-∞}^x dt/r`.
pub fn model_pfss(pair: &CoefficientPair) -> Result<PrincipalSystem> {
    let model = pair.model();
    let left = coefficients::inv_r_integrable_on(&model, false);
    let right = coefficients::inv_r_integrable_on(&model, true);
    if left == Ternary::False || right == Ternary::False {
        return Err(Error::ModelRequiresIntegrableInvR);
    }
    if let Some((_, _)) = model.as_constant() {
        return Err(Error::ModelRequiresIntegrableInvR);
    }
    let cum = Cumulative::build(model.inv_r_fn(), model.breakpoints())?;
    let w0 = cum.total();
    if !w0.is_finite() {
        return Err(Error::ModelRequiresIntegrableInvR);
    }
    finish(PrincipalSystem {
        pair: model,
        repr: Arc::new(Repr::Model { cum, sqrt_w0: w0.sqrt() }),
        su: 1.0,
        sv: 1.0,
        x0: 0.0,
        method: Method::ExplicitModel,
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        quality: None,
        notes: vec![],
    })
}

fn constant_pfss(pair: &CoefficientPair, r0: f64, q0: f64) -> Result<PrincipalSystem> {
    let m = (q0 / r0).sqrt();
    let norm = 1.0 / (2.0 * m * r0).sqrt();
    finish(PrincipalSystem {
        pair: pair.clone(),
        repr: Arc::new(Repr::Constant { m, r0, norm }),
        su: 1.0,
        sv: 1.0,
        x0: 0.0,
        method: Method::ConstantClosedForm,
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        quality: None,
        notes: vec![],
    })
}

/// Builds a principal system by whichever construction applies.
pub fn construct_pfss(pair: &CoefficientPair, opts: &PfssOptions) -> Result<PrincipalSystem> {
    if let Some((r0, q0)) = pair.as_constant() {
        if q0 > 0.0 {
            return constant_pfss(pair, r0, q0);
        }
    }
    if pair.is_q_zero() {
        return model_pfss(pair);
    }
    let profile = classify(pair, coefficients::IMPROPER_TOL);
    let applicable =
        profile.condition_2_20.is_true() || profile.inv_r_l1.is_true() || profile.q_mass_both_halves.is_true();
    if !applicable {
        return Err(Error::PfssUnavailable(
            "q has no positive mass on one half-line and 1/r is not integrable".into(),
        ));
    }
    matched_pfss(pair, opts)
}

struct SidePlan {
    data: TailData,
    cutoff: f64,
    continues: bool,
}

fn plan_side(pair: &CoefficientPair, cum: Option<&Cumulative>, right: bool, opts: &PfssOptions) -> Result<SidePlan> {
    let sign = if right { 1.0 } else { -1.0 };
    let integrable = coefficients::inv_r_integrable_on(pair, right).is_true()
        && cum.is_some_and(|c| if right { c.right_integrable() } else { c.left_integrable() });
    let vanishes = coefficients::q_vanishes_on(pair, right);
    let x_max = pair.truncation().x_max.max(1.0);
    if vanishes {
        let data = if integrable { TailData::Integrable } else { TailData::Flat };
        return Ok(SidePlan { data, cutoff: x_max, continues: true });
    }
    if integrable {
        let cum = cum.expect("integrable side has a table");
        let q = pair.q_fn();
        let w0 = cum.total();
        let mut x = (10.0 * opts.extent).max(x_max);
        loop {
            // ρ₁ = U V / w0 on the right and its mirror on the left.
            let remainder = |t: f64| {
                let s = sign * t;
                q(s) * cum.above(s) * cum.below(s) / w0
            };
            let rem = quad::integrate(&remainder, x, f64::INFINITY, Tolerance::new(opts.match_tol * 1e-3, 1e-6))
                .map(|e| e.value)
                .unwrap_or(f64::INFINITY);
            if rem < opts.match_tol || x >= opts.max_cutoff {
                return Ok(SidePlan { data: TailData::Integrable, cutoff: x, continues: false });
            }
            x *= 4.0;
        }
    }
    Ok(SidePlan { data: TailData::Dirichlet, cutoff: (16.0 * opts.extent).max(x_max), continues: false })
}

fn tail_state(data: TailData, cum: Option<&Cumulative>, x: f64, right: bool) -> State {
    let sign = if right { -1.0 } else { 1.0 };
    match data {
        TailData::Integrable => {
            let cum = cum.expect("integrable side has a table");
            let mass = if right { cum.above(x) } else { cum.below(x) };
            let w0 = cum.total();
            let norm = if w0.is_finite() { 1.0 / w0.sqrt() } else { 1.0 };
            [mass * norm, sign * norm]
        }
        TailData::Flat => [1.0, 0.0],
        TailData::Dirichlet => [0.0, sign],
    }
}

fn shoot(
    pair: &CoefficientPair,
    ode_opts: &OdeOptions,
    from: f64,
    y0: State,
    to: f64,
    label: &str,
) -> Result<Trajectory> {
    let r = pair.r_fn();
    let q = pair.q_fn();
    let rhs = move |x: f64, y: &State| [y[1] / r(x), q(x) * y[0]];
    let mut xs = vec![from];
    let mut ys = vec![y0];
    ode::integrate(&rhs, from, y0, to, ode_opts, |x, y| {
        if !(y[0] > 0.0) {
            return Err(Error::MatchingFailed(format!("{label} lost positivity at x = {x}")));
        }
        xs.push(x);
        ys.push(*y);
        Ok(())
    })?;
    if xs.len() > 1 && xs[0] > xs[xs.len() - 1] {
        xs.reverse();
        ys.reverse();
    }
    Ok(Trajectory { xs, ys })
}

fn matched_pfss(pair: &CoefficientPair, opts: &PfssOptions) -> Result<PrincipalSystem> {
    let needs_table = [false, true].iter().any(|&right| coefficients::inv_r_integrable_on(pair, right).is_true());
    let cum = if needs_table { Some(Cumulative::build(pair.inv_r_fn(), pair.breakpoints())?) } else { None };
    let mut right = plan_side(pair, cum.as_ref(), true, opts)?;
    let mut left = plan_side(pair, cum.as_ref(), false, opts)?;
    let certificate = (1.0 / opts.match_tol).ln();
    let mut notes = Vec::new();
    for attempt in 0..6 {
        let (lo, hi) = (-left.cutoff, right.cutoff);
        let u0 = tail_state(right.data, cum.as_ref(), hi, true);
        let u = shoot(pair, &opts.ode, hi, u0, lo, "u")?;
        let ul = u.ys[0];
        let d = tail_state(left.data, cum.as_ref(), lo, false);
        let w = d[1] * ul[0] - ul[1] * d[0];
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::MatchingFailed(format!("non-positive Wronskian {w:e} at x = {lo}")));
        }
        let v0 = [d[0] / w, d[1] / w];
        let v = shoot(pair, &opts.ode, lo, v0, hi, "v")?;
        let domain_lo = match left.data {
            _ if left.continues => f64::NEG_INFINITY,
            TailData::Dirichlet => lo / 2.0,
            _ => lo,
        };
        let domain_hi = match right.data {
            _ if right.continues => f64::INFINITY,
            TailData::Dirichlet => hi / 2.0,
            _ => hi,
        };
        let sys = PrincipalSystem {
            pair: pair.clone(),
            repr: Arc::new(Repr::Matched(Box::new(Matched {
                pair: pair.clone(),
                ode: opts.ode,
                u,
                v,
                lo,
                hi,
                continue_left: left.continues,
                continue_right: right.continues,
            }))),
            su: 1.0,
            sv: 1.0,
            x0: 0.0,
            method: Method::AsymptoticMatching,
            domain: (domain_lo, domain_hi),
            quality: None,
            notes: notes.clone(),
        };
        // Dirichlet tails carry an admixture of the dominant solution that
        // decays like exp(-(Λ(X) - Λ(x))); demand enough separation.
        let mut retry = false;
        let e = opts.extent.min(domain_hi).min(-domain_lo);
        if right.data == TailData::Dirichlet && sys.inv_r_rho_integral(e, domain_hi) < certificate {
            right.cutoff *= 16.0;
            retry = true;
        }
        if left.data == TailData::Dirichlet && sys.inv_r_rho_integral(domain_lo, -e) < certificate {
            left.cutoff *= 16.0;
            retry = true;
        }
        if !retry || attempt == 5 {
            if retry {
                notes.push("Dirichlet cutoff certificate not reached".into());
            }
            let mut sys = sys;
            sys.notes = notes;
            // Tail normalizations can leave u = v far outside the domain;
            // a power-of-two rescale keeps ρ bit-identical.
            let (u0, v0) = (sys.u(0.0), sys.v(0.0));
            if u0 > 0.0 && v0 > 0.0 {
                let a = 2f64.powi((0.5 * (v0 / u0).log2()).round() as i32);
                sys.su = a;
                sys.sv = 1.0 / a;
            }
            return finish(sys);
        }
        notes.push(format!("cutoff enlarged to [{}, {}]", -left.cutoff, right.cutoff));
    }
    unreachable!("loop returns on the last attempt")
}

/// Functions `u, v` rebuilt from `ρ` and `x₀` alone.
#[derive(Clone)]
pub struct DaviesHarrell {
    rho: ScalarFn,
    x0: f64,
    pair: CoefficientPair,
}

impl DaviesHarrell {
    fn exponent(&self, x: f64) -> Result<f64> {
        let r = self.pair.r_fn();
        let rho = self.rho.clone();
        let g = move |t: f64| 1.0 / (r(t) * rho(t));
        let mut breaks: Vec<f64> = self.pair.breakpoints().to_vec();
        breaks.push(0.0);
        Ok(quad::integrate_with_breaks(&g, self.x0, x, &breaks, Tolerance::new(1e-14, 1e-12))?.value)
    }

    pub fn u(&self, x: f64) -> Result<f64> {
        Ok((self.rho)(x).sqrt() * (-0.5 * self.exponent(x)?).exp())
    }

    pub fn v(&self, x: f64) -> Result<f64> {
        Ok((self.rho)(x).sqrt() * (0.5 * self.exponent(x)?).exp())
    }
}

pub fn davies_harrell_reconstruct(rho: ScalarFn, x0: f64, pair: &CoefficientPair) -> DaviesHarrell {
    DaviesHarrell { rho, x0, pair: pair.clone() }
}

/// Verification residuals of a principal system on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfssQuality {
    pub points: usize,
    pub max_wronskian_dev: f64,
    pub sign_violations: usize,
    pub monotonicity_violations: usize,
    pub max_r_rho_prime: f64,
    pub max_log_derivative_dev: f64,
    pub ratio_trend_ok: bool,
    pub scaling_exact: bool,
    pub scale_used: f64,
}

impl PfssQuality {
    pub fn acceptable(&self) -> bool {
        self.max_wronskian_dev < 1e-6
            && self.sign_violations == 0
            && self.monotonicity_violations == 0
            && self.max_r_rho_prime <= 1.0 + 1e-6
            && self.ratio_trend_ok
            && self.scaling_exact
    }
}

/// Checks positivity, monotonicity, the unit Wronskian, `r|ρ'| < 1`, the
/// logarithmic-derivative identity, the trend of `u/v`, and invariance of
/// `ρ` under `(a u, v/a)`.
pub fn verify_pfss(sys: &PrincipalSystem, grid: &[f64]) -> PfssQuality {
    let mut q = PfssQuality {
        points: 0,
        max_wronskian_dev: 0.0,
        sign_violations: 0,
        monotonicity_violations: 0,
        max_r_rho_prime: 0.0,
        max_log_derivative_dev: 0.0,
        ratio_trend_ok: true,
        scaling_exact: true,
        scale_used: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_a11);
    let a = 2f64.powi(rng.gen_range(-20..=20));
    q.scale_used = a;
    let scaled = sys.rescaled(a);
    let mut prev_ratio: Option<f64> = None;
    for &x in grid.iter().filter(|&&x| sys.contains(x)) {
        q.points += 1;
        let u = sys.u_state(x);
        let v = sys.v_state(x);
        let nan = |s: &State| s[0].is_nan() || s[1].is_nan();
        if nan(&u) || nan(&v) {
            q.sign_violations += 1;
            continue;
        }
        let w = v[1] * u[0] - u[1] * v[0];
        q.max_wronskian_dev = q.max_wronskian_dev.max((w - 1.0).abs());
        if !(u[0] > 0.0 && v[0] > 0.0) {
            q.sign_violations += 1;
        }
        if u[1] > 0.0 || v[1] < 0.0 {
            q.monotonicity_violations += 1;
        }
        let h = 1e-4 * (1.0 + x.abs());
        let r = sys.pair.r(x);
        let rho = sys.rho(x);
        let drho = (sys.rho(x + h) - sys.rho(x - h)) / (2.0 * h);
        if drho.is_finite() {
            q.max_r_rho_prime = q.max_r_rho_prime.max(r * drho.abs());
            let lhs = u[1] / (r * u[0]);
            let rhs = -(1.0 - r * drho) / (2.0 * r * rho);
            let dev = (lhs - rhs).abs() / (1.0 / (r * rho));
            q.max_log_derivative_dev = q.max_log_derivative_dev.max(dev);
        }
        let ratio = -sys.log_ratio(x);
        if let Some(p) = prev_ratio {
            if !(ratio < p) {
                q.ratio_trend_ok = false;
            }
        }
        prev_ratio = Some(ratio);
        if scaled.rho(x).to_bits() != rho.to_bits() {
            q.scaling_exact = false;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn model1() -> PrincipalSystem {
        model_pfss(&CoefficientPair::power_law(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn model_alpha_one_closed_form() {
        let s = model1();
        assert!((s.u(0.0) - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((s.v(0.0) - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((s.rho(0.0) - PI / 4.0).abs() < 1e-13);
        assert!(s.x0().abs() < 1e-10);
        for &x in &[-100.0, -3.0, 0.5, 7.0, 1e4] {
            let u = (PI / 2.0 - f64::atan(x)) / PI.sqrt();
            let v = (PI / 2.0 + f64::atan(x)) / PI.sqrt();
            assert!((s.u(x) / u - 1.0).abs() < 1e-12, "{x}");
            assert!((s.v(x) / v - 1.0).abs() < 1e-12, "{x}");
            assert!((s.wronskian(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_requires_integrable_inv_r() {
        let c = CoefficientPair::constant(1.0, 1.0).unwrap();
        assert_eq!(model_pfss(&c).unwrap_err(), Error::ModelRequiresIntegrableInvR);
        let z = CoefficientPair::constant(1.0, 0.0).unwrap();
        assert_eq!(construct_pfss(&z, &PfssOptions::default()).unwrap_err(), Error::ModelRequiresIntegrableInvR);
    }

    #[test]
    fn constant_closed_form() {
        let c = CoefficientPair::constant(1.0, 1.0).unwrap();
        let s = construct_pfss(&c, &PfssOptions::default()).unwrap();
        assert_eq!(s.method(), Method::ConstantClosedForm);
        assert_eq!(s.x0(), 0.0);
        for &x in &[-3.0, 0.0, 2.5] {
            assert_eq!(s.rho(x), 0.5);
            assert!((s.u(x) - (-x).exp() / 2f64.sqrt()).abs() < 1e-15);
            assert!((s.wronskian(x) - 1.0).abs() < 1e-14);
        }
        let q = s.quality().unwrap();
        assert!(q.max_wronskian_dev < 1e-10);
        assert_eq!(q.max_r_rho_prime, 0.0);
    }

    #[test]
    fn dispatch_identity_for_zero_potential() {
        let pair = CoefficientPair::power_law(1.0, 1.0).unwrap().model();
        let a = construct_pfss(&pair, &PfssOptions::default()).unwrap();
        let b = model1();
        for &x in &[-50.0, 0.0, 3.0] {
            assert!((a.u(x) - b.u(x)).abs() < 1e-12);
            assert!((a.v(x) - b.v(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn davies_harrell_constant() {
        let c = CoefficientPair::constant(1.0, 1.0).unwrap();
        let dh = davies_harrell_reconstruct(Arc::new(|_| 0.5), 0.0, &c);
        for &x in &[-2.0, 0.0, 1.5] {
            assert!((dh.u(x).unwrap() - (-x).exp() / 2f64.sqrt()).abs() < 1e-12);
            assert!((dh.v(x).unwrap() - x.exp() / 2f64.sqrt()).abs() < 1e-12);
        }
        assert!((dh.u(0.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn davies_harrell_round_trip_model() {
        let s = model1();
        let sc = s.clone();
        let dh = davies_harrell_reconstruct(Arc::new(move |x| sc.rho(x)), s.x0(), s.pair());
        for k in 0..=20 {
            let x = -50.0 + 5.0 * k as f64;
            assert!((dh.u(x).unwrap() / s.u(x) - 1.0).abs() < 1e-8, "{x}");
            assert!((dh.v(x).unwrap() / s.v(x) - 1.0).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn scaled_system_has_identical_rho() {
        let s = model1();
        let t = s.rescaled(2.0);
        for &x in &[-7.0, 0.0, 0.3, 1e3] {
            assert_eq!(s.rho(x).to_bits(), t.rho(x).to_bits());
            assert_eq!(t.u(x), 2.0 * s.u(x));
        }
    }

    #[test]
    fn matched_power_law_is_a_principal_system() {
        let pair = CoefficientPair::power_law(1.0, 1.0).unwrap();
        let s = construct_pfss(&pair, &PfssOptions { extent: 1e4, ..Default::default() }).unwrap();
        assert_eq!(s.method(), Method::AsymptoticMatching);
        let q = s.quality().unwrap();
        assert!(q.acceptable(), "{q:?}");
        let m = model1();
        let mut c: f64 = 1.0;
        for k in 0..=40 {
            let x = -1e3 + 50.0 * k as f64;
            let ratio = s.rho(x) / m.rho(x);
            c = c.max(ratio).max(1.0 / ratio);
        }
        assert!(c < 3.0, "weak equivalence constant {c}");
        assert!((s.rho(1e3) / m.rho(1e3) - 1.0).abs() < 0.1);
    }

    #[test]
    fn compact_potential_uses_exact_continuation() {
        let pair = CoefficientPair::composite(
            "bump",
            Arc::new(|_| 1.0),
            Some(Arc::new(|x: f64| if x.abs() < 1.0 { (1.0 - x * x).powi(2) } else { 0.0 })),
            coefficients::Truncation::symmetric(1.0, coefficients::TailLaw::Power(0.0), coefficients::TailLaw::Zero),
            vec![-1.0, 1.0],
        );
        let s = construct_pfss(&pair, &PfssOptions::default()).unwrap();
        assert_eq!(s.domain(), (f64::NEG_INFINITY, f64::INFINITY));
        for &x in &[-40.0, -1.0, 0.0, 0.5, 3.0, 100.0] {
            assert!((s.wronskian(x) - 1.0).abs() < 1e-8, "{x}: {}", s.wronskian(x));
        }
        // u is constant to the right of the support
        assert!((s.u(10.0) - s.u(50.0)).abs() < 1e-12);
        assert!((s.u(s.x0()) / s.v(s.x0()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn v_integral_representation() {
        // u(x) = v(x) ∫_x^∞ dt/(r v²)
        let pair = CoefficientPair::power_law(1.5, 1.0).unwrap();
        let s = construct_pfss(&pair, &PfssOptions { extent: 1e3, ..Default::default() }).unwrap();
        let (_, hi) = s.domain();
        for &x in &[-20.0, -2.0, 0.0, 1.0, 5.0, 30.0] {
            let g = |t: f64| 1.0 / (pair.r(t) * s.v(t).powi(2));
            let tail = quad::integrate(&g, x, hi, Tolerance::relative(1e-10)).unwrap().value;
            assert!((s.v(x) * tail / s.u(x) - 1.0).abs() < 1e-4, "{x}");
        }
    }
}

//! Correct solvability of `-(r y')' + q y = f` in `L_p`.
//!
//! Every criterion is a supremum or infimum over the line and is estimated
//! with the shared trend policy. A criterion either supports a verdict,
//! is neutral, or failed; the verdict collects the determinate outcomes in
//! a fixed order and reports disagreement as inconclusive.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;

use crate::auxiliary::{compute_s, OtelbaevProfile, S_TOL};
use crate::coefficients::{self, classify, CoefficientPair, IntegrabilityProfile};
use crate::error::{Error, Result};
use crate::green::{self, GreenKernel, HardyReport, Operator};
use crate::pfss::{construct_pfss, model_pfss, Method, PfssOptions, PfssQuality, PrincipalSystem};
use crate::quad::{self, Tolerance};
use crate::report::{serialize_extended, serialize_extended_opt};
use crate::trend::{inf_trend, sup_trend, Trend, TrendPolicy, TrendRecord};

/// Largest bracket constant accepted when a solvable verdict is checked
/// against norm probes.
pub const MAX_BRACKET_CONSTANT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Quantity {
    Finite {
        value: f64,
        band: f64,
    },
    Diverging {
        #[serde(serialize_with = "serialize_extended_opt")]
        exponent: Option<f64>,
        #[serde(serialize_with = "serialize_extended")]
        last: f64,
    },
    Vanishing {
        #[serde(serialize_with = "serialize_extended_opt")]
        exponent: Option<f64>,
    },
    Undetermined {
        reason: String,
    },
    NotApplicable {
        reason: String,
    },
}

impl Quantity {
    fn from_trend(t: &Trend) -> Self {
        match t {
            Trend::Stable { value, band, .. } => Quantity::Finite { value: *value, band: *band },
            Trend::Growing { exponent, last, .. } => Quantity::Diverging { exponent: *exponent, last: *last },
            Trend::Vanishing { exponent, .. } => Quantity::Vanishing { exponent: *exponent },
            Trend::Undetermined { reason, .. } => Quantity::Undetermined { reason: reason.clone() },
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Quantity::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Quantity::Finite { .. })
    }

    pub fn is_diverging(&self) -> bool {
        matches!(self, Quantity::Diverging { .. })
    }

    pub fn exponent(&self) -> Option<f64> {
        match self {
            Quantity::Diverging { exponent, .. } | Quantity::Vanishing { exponent } => *exponent,
            _ => None,
        }
    }

    /// A finite, strictly positive limit.
    pub fn is_positive(&self) -> bool {
        matches!(self, Quantity::Finite { value, .. } if *value > 0.0)
    }
}

/// `s(x)` with memoization; the criteria sample the same abscissae.
struct Widths<'a> {
    sys: &'a PrincipalSystem,
    tol: f64,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<'a> Widths<'a> {
    fn new(sys: &'a PrincipalSystem, tol: f64) -> Self {
        Widths { sys, tol, cache: RefCell::new(HashMap::new()) }
    }

    fn s(&self, x: f64) -> Result<f64> {
        if let Some(&s) = self.cache.borrow().get(&x.to_bits()) {
            return Ok(s);
        }
        let s = compute_s(self.sys, x, self.tol)?;
        self.cache.borrow_mut().insert(x.to_bits(), s);
        Ok(s)
    }
}

/// `sup ρ(x) s(x)`.
pub fn estimate_d(sys: &PrincipalSystem, policy: &TrendPolicy, tol: f64) -> (Quantity, TrendRecord) {
    estimate_d_with(sys, &Widths::new(sys, tol), policy)
}

fn estimate_d_with(sys: &PrincipalSystem, widths: &Widths, policy: &TrendPolicy) -> (Quantity, TrendRecord) {
    let rec = sup_trend(policy, |x| Ok(sys.rho(x) * widths.s(x)?));
    (Quantity::from_trend(&rec.trend), rec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaRecord {
    /// `sup r ρ²`
    pub sigma1: Quantity,
    /// `sup ρ |x|`
    pub sigma2: Quantity,
    /// `inf (2s)^{-1} ∫_{x-s}^{x+s} q`
    pub sigma3: Quantity,
    /// `inf q`
    pub sigma4: Quantity,
    /// `sup r (∫_{-∞}^x 1/r)² (∫_x^∞ 1/r)²`
    pub sigma5: Quantity,
}

impl SigmaRecord {
    /// Names of the criteria that hold.
    pub fn satisfied(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.sigma1.is_finite() {
            out.push("sigma1");
        }
        if self.sigma2.is_finite() {
            out.push("sigma2");
        }
        if self.sigma3.is_positive() {
            out.push("sigma3");
        }
        if self.sigma4.is_positive() {
            out.push("sigma4");
        }
        if self.sigma5.is_finite() {
            out.push("sigma5");
        }
        out
    }
}

/// `inf q`, which needs no principal system.
pub fn sigma4(pair: &CoefficientPair, policy: &TrendPolicy) -> Quantity {
    Quantity::from_trend(&inf_trend(policy, |x| Ok(pair.q(x))).trend)
}

/// `sup r U² V²` with `U, V` the tail integrals of `1/r`.
pub fn sigma5(pair: &CoefficientPair, profile: &IntegrabilityProfile, policy: &TrendPolicy) -> Quantity {
    if !profile.inv_r_l1.is_true() {
        return Quantity::NotApplicable { reason: "1/r is not integrable".into() };
    }
    let model = match model_pfss(pair) {
        Ok(m) => m,
        Err(e) => return Quantity::Undetermined { reason: e.to_string() },
    };
    let w0 = profile.w0;
    Quantity::from_trend(&sup_trend(policy, |x| Ok(pair.r(x) * (model.rho(x) * w0).powi(2))).trend)
}

pub fn sigma_criteria(
    sys: &PrincipalSystem,
    pair: &CoefficientPair,
    profile: &IntegrabilityProfile,
    policy: &TrendPolicy,
    tol: f64,
) -> SigmaRecord {
    sigma_with(sys, &Widths::new(sys, tol), pair, profile, policy)
}

fn sigma_with(
    sys: &PrincipalSystem,
    widths: &Widths,
    pair: &CoefficientPair,
    profile: &IntegrabilityProfile,
    policy: &TrendPolicy,
) -> SigmaRecord {
    let sigma1 = sup_trend(policy, |x| Ok(pair.r(x) * sys.rho(x).powi(2)));
    let sigma2 = sup_trend(policy, |x| Ok(sys.rho(x) * x.abs()));
    let sigma3 = inf_trend(policy, |x| {
        let s = widths.s(x)?;
        Ok(pair.integrate_q(x - s, x + s, coefficients::FINITE_TOL)? / (2.0 * s))
    });
    SigmaRecord {
        sigma1: Quantity::from_trend(&sigma1.trend),
        sigma2: Quantity::from_trend(&sigma2.trend),
        sigma3: Quantity::from_trend(&sigma3.trend),
        sigma4: sigma4(pair, policy),
        sigma5: sigma5(pair, profile, policy),
    }
}

/// Bounded `r` together with `r ρ → ∞` rules out solvability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonSolvability {
    pub sup_r: Quantity,
    pub r_rho: Quantity,
    pub holds: bool,
}

pub fn check_nonsolvability(sys: &PrincipalSystem, pair: &CoefficientPair, policy: &TrendPolicy) -> NonSolvability {
    let sup_r = Quantity::from_trend(&sup_trend(policy, |x| Ok(pair.r(x))).trend);
    if !sup_r.is_finite() {
        return NonSolvability {
            sup_r,
            r_rho: Quantity::NotApplicable { reason: "r is not bounded above".into() },
            holds: false,
        };
    }
    let rec = sup_trend(policy, |x| Ok(pair.r(x) * sys.rho(x)));
    let holds = rec.trend.is_growing() && rec.shell_min_growing(policy.growth_rel);
    NonSolvability { sup_r, r_rho: Quantity::from_trend(&rec.trend), holds }
}

/// `sup h(x) d(x)`; defined only under the windowed limit condition.
pub fn estimate_b(pair: &CoefficientPair, policy: &TrendPolicy, tol: f64) -> Result<Quantity> {
    let prof = OtelbaevProfile::new(pair, tol)?;
    let rec = sup_trend(policy, |x| {
        let h = prof.h(x)?;
        Ok(h * prof.d(x)?)
    });
    Ok(Quantity::from_trend(&rec.trend))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Convergence {
    Absolute {
        value: f64,
    },
    /// Signed partial integrals settle although `|Δq| ρ₁` is not integrable;
    /// `squared` is `∫ I(x)² / (r ρ₁)` over the half-line.
    Conditional {
        value: f64,
        squared: Quantity,
    },
    Divergent,
    Undetermined {
        reason: String,
    },
}

impl Convergence {
    /// Whether the asymptotic problem on this side is solvable.
    pub fn solvable(&self) -> bool {
        match self {
            Convergence::Absolute { .. } => true,
            Convergence::Conditional { squared, .. } => squared.is_finite(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSample {
    pub x: f64,
    pub u_ratio: f64,
    pub v_ratio: f64,
    pub rho_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HartmanWintnerDiagnostics {
    pub i_plus: Convergence,
    pub i_minus: Convergence,
    /// Partial integrals `∫_0^{±2^k} Δq ρ₁`.
    pub partial_plus: Vec<(f64, f64)>,
    pub partial_minus: Vec<(f64, f64)>,
    pub ratio_trace: Vec<RatioSample>,
}

const HW_TOL: Tolerance = Tolerance::new(1e-14, 1e-9);

fn half_line(f: &dyn Fn(f64) -> f64, right: bool, breaks: &[f64]) -> Result<f64> {
    let (a, b) = if right { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
    Ok(quad::integrate_with_breaks(f, a, b, breaks, HW_TOL)?.value)
}

fn side_convergence(
    pair: &CoefficientPair,
    model: &PrincipalSystem,
    delta_q: &dyn Fn(f64) -> f64,
    right: bool,
) -> (Convergence, Vec<(f64, f64)>) {
    let breaks = pair.breakpoints();
    let sign = if right { 1.0 } else { -1.0 };
    let signed = |t: f64| delta_q(t) * model.rho(t);
    let mut partial = Vec::new();
    let mut acc = 0.0;
    let mut prev = 0.0;
    for k in 0..=40 {
        let edge = 2f64.powi(k);
        let (a, b) = if right { (prev, edge) } else { (-edge, -prev) };
        match quad::integrate_finite(&signed, a, b, breaks, HW_TOL) {
            Ok(e) => acc += e.value,
            Err(e) => return (Convergence::Undetermined { reason: e.to_string() }, partial),
        }
        partial.push((sign * edge, acc));
        prev = edge;
    }
    let absolute = |t: f64| delta_q(t).abs() * model.rho(t);
    match half_line(&absolute, right, breaks) {
        Ok(v) => return (Convergence::Absolute { value: v }, partial),
        Err(Error::NonIntegrableTail { .. }) => {}
        Err(e) => return (Convergence::Undetermined { reason: e.to_string() }, partial),
    }
    // Signed partial sums that settle to a limit are a conditional candidate.
    let n = partial.len();
    let tail: Vec<f64> = partial[n - 8..].iter().map(|p| p.1).collect();
    let spread = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = tail[tail.len() - 1];
    if !(spread <= 1e-3 * limit.abs().max(1e-12)) {
        return (Convergence::Divergent, partial);
    }
    let i_of = |x: f64| -> Result<f64> {
        let (a, b) = if right { (x, f64::INFINITY) } else { (f64::NEG_INFINITY, x) };
        Ok(quad::integrate_with_breaks(&signed, a, b, breaks, HW_TOL)?.value)
    };
    let failure = RefCell::new(None);
    let squared = |x: f64| match i_of(x) {
        Ok(i) => i * i / (pair.r(x) * model.rho(x)),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let squared = match half_line(&squared, right, breaks) {
        Ok(v) if failure.borrow().is_none() => Quantity::Finite { value: v, band: 0.0 },
        Err(Error::NonIntegrableTail { .. }) => Quantity::Diverging { exponent: None, last: f64::INFINITY },
        Err(e) => Quantity::Undetermined { reason: e.to_string() },
        Ok(_) => Quantity::Undetermined { reason: failure.borrow().as_ref().map(|e| e.to_string()).unwrap_or_default() },
    };
    (Convergence::Conditional { value: limit, squared }, partial)
}

/// Asymptotic comparison of `(r y')' = q y` with `(r z')' = q₁ z`, where
/// `model` is a principal system of the second equation.
pub fn hartman_wintner_check(
    pair: &CoefficientPair,
    model_pair: &CoefficientPair,
    model: &PrincipalSystem,
    matched: Option<&PrincipalSystem>,
) -> HartmanWintnerDiagnostics {
    let delta_q = |t: f64| pair.q(t) - model_pair.q(t);
    let (i_plus, partial_plus) = side_convergence(pair, model, &delta_q, true);
    let (i_minus, partial_minus) = side_convergence(pair, model, &delta_q, false);
    let mut ratio_trace = Vec::new();
    if let Some(sys) = matched {
        for k in 0..=20 {
            for x in [2f64.powi(k), -(2f64.powi(k))] {
                if !sys.contains(x) {
                    continue;
                }
                ratio_trace.push(RatioSample {
                    x,
                    u_ratio: sys.u(x) / model.u(x),
                    v_ratio: sys.v(x) / model.v(x),
                    rho_ratio: sys.rho(x) / model.rho(x),
                });
            }
        }
        ratio_trace.sort_by(|a, b| a.x.total_cmp(&b.x));
    }
    HartmanWintnerDiagnostics { i_plus, i_minus, partial_plus, partial_minus, ratio_trace }
}

/// Evidence that `ρ` and the model `ρ₁` are weakly equivalent.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionCertificate {
    /// `∫_{-∞}^0 q(x) ∫_{-∞}^x dt/r dx`
    pub j_minus: f64,
    /// `∫_0^∞ q(x) ∫_x^∞ dt/r dx`
    pub j_plus: f64,
    /// `sup max(ρ/ρ₁, ρ₁/ρ)` on the analysis grid, when a principal system
    /// of the full equation is available.
    #[serde(serialize_with = "serialize_extended_opt")]
    pub c: Option<f64>,
    pub c_trend: Option<Trend>,
    #[serde(skip)]
    pub model_pair: CoefficientPair,
    #[serde(skip)]
    pub model_sys: PrincipalSystem,
}

impl ReductionCertificate {
    /// The equivalence constant was measured and settled.
    pub fn measured(&self) -> bool {
        self.c_trend.as_ref().is_some_and(Trend::is_stable)
    }
}

/// Replaces `q` by zero and certifies that the verdict transfers.
pub fn reduce_to_model(
    pair: &CoefficientPair,
    sys: Option<&PrincipalSystem>,
    policy: &TrendPolicy,
) -> Result<ReductionCertificate> {
    if !coefficients::inv_r_integrable_on(pair, true).is_true() || !coefficients::inv_r_integrable_on(pair, false).is_true()
    {
        return Err(Error::ReductionUnavailable("1/r is not integrable over the line".into()));
    }
    let model_pair = pair.model();
    let model_sys = model_pfss(pair).map_err(|e| Error::ReductionUnavailable(e.to_string()))?;
    // U = √w0 u₁ and V = √w0 v₁.
    let scale = {
        let (u, v) = (model_sys.u(0.0), model_sys.v(0.0));
        let big_u = pair.integrate_inv_r(0.0, f64::INFINITY, coefficients::IMPROPER_TOL)?;
        let big_v = pair.integrate_inv_r(f64::NEG_INFINITY, 0.0, coefficients::IMPROPER_TOL)?;
        0.5 * (big_u / u + big_v / v)
    };
    let breaks = pair.breakpoints();
    let j = |right: bool| -> Result<f64> {
        let f = |x: f64| pair.q(x) * scale * if right { model_sys.u(x) } else { model_sys.v(x) };
        half_line(&f, right, breaks).map_err(|e| match e {
            Error::NonIntegrableTail { .. } => {
                Error::ReductionUnavailable("q weighted by the tail integral of 1/r is not integrable".into())
            }
            e => e,
        })
    };
    let (j_minus, j_plus) = (j(false)?, j(true)?);
    if pair.is_q_zero() {
        return Ok(ReductionCertificate {
            j_minus,
            j_plus,
            c: Some(1.0),
            c_trend: Some(Trend::Stable { value: 1.0, band: 0.0, level: 0 }),
            model_pair,
            model_sys,
        });
    }
    let (c, c_trend) = match sys {
        Some(sys) => {
            let rec = sup_trend(policy, |x| {
                let q = sys.rho(x) / model_sys.rho(x);
                Ok(q.max(1.0 / q))
            });
            (Some(rec.trend.last()), Some(rec.trend))
        }
        None => (None, None),
    };
    Ok(ReductionCertificate { j_minus, j_plus, c, c_trend, model_pair, model_sys })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    CorrectlySolvable,
    NotCorrectlySolvable,
    Inconclusive,
}

impl Verdict {
    /// Process exit code of the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::CorrectlySolvable => 0,
            Verdict::NotCorrectlySolvable => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Short form used in sweep tables.
    pub fn short(self) -> &'static str {
        match self {
            Verdict::CorrectlySolvable => "solvable",
            Verdict::NotCorrectlySolvable => "not",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solvable,
    NotSolvable,
    Neutral,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub criterion: &'static str,
    /// The statement the outcome rests on.
    pub basis: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReduction {
    pub j_minus: f64,
    pub j_plus: f64,
    #[serde(serialize_with = "serialize_extended_opt")]
    pub c: Option<f64>,
    pub model_d: Quantity,
}

/// Upper bracket for `‖G‖_p` from the Hardy functionals and the lower
/// witness from probes, both relative to `D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRealization {
    pub hardy: HardyReport,
    #[serde(serialize_with = "serialize_extended")]
    pub upper: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub c_upper: f64,
    pub probes: usize,
    pub probe_max: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub c_probe: f64,
    pub within_bracket: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfssSummary {
    pub method: Method,
    pub x0: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub domain_lo: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub domain_hi: f64,
    pub quality: Option<PfssQuality>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityReport {
    pub verdict: Verdict,
    pub p: f64,
    pub regime: IntegrabilityProfile,
    pub pfss: Option<PfssSummary>,
    #[serde(rename = "D")]
    pub d: Quantity,
    pub sigma1: Quantity,
    pub sigma2: Quantity,
    pub sigma3: Quantity,
    pub sigma4: Quantity,
    pub sigma5: Quantity,
    #[serde(rename = "B")]
    pub b: Quantity,
    pub nonsolvability: Option<NonSolvability>,
    pub hartman_wintner: Option<HartmanWintnerDiagnostics>,
    pub model_reduction: Option<ModelReduction>,
    pub norms: Option<NormRealization>,
    pub evidence: Vec<Evidence>,
}

impl SolvabilityReport {
    /// Fitted growth exponent of `ρ s`. The model equation is preferred
    /// when the reduction applies: its `ρ₁` is exact, while `ρ/ρ₁` of the
    /// full equation may still drift at the scales the trend reaches.
    pub fn d_exponent(&self) -> Option<f64> {
        self.model_reduction.as_ref().and_then(|m| m.model_d.exponent()).or_else(|| self.d.exponent())
    }

    /// `D` if finite, else its growth exponent.
    pub fn d_or_exponent(&self) -> Option<f64> {
        self.d.value().or_else(|| self.d_exponent())
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub trend: TrendPolicy,
    pub pfss: PfssOptions,
    /// Tolerance of `|F(s) - 1|` in the width function.
    pub s_tol: f64,
    /// Compute the Hardy bracket for `p` and compare it with `D`.
    pub hardy: bool,
    /// Number of random probes checked against the bracket (needs `hardy`).
    pub probes: usize,
    pub seed: u64,
    /// Evaluate `B` when the windowed limit condition holds.
    pub otelbaev: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            trend: TrendPolicy::default(),
            pfss: PfssOptions::default(),
            s_tol: S_TOL,
            hardy: false,
            probes: 0,
            seed: 0,
            otelbaev: true,
        }
    }
}

/// Runs every applicable criterion and derives the verdict.
pub fn analyze(pair: &CoefficientPair, p: f64, opts: &AnalyzeOptions) -> Result<SolvabilityReport> {
    let sys = construct_pfss(pair, &opts.pfss);
    analyze_inner(pair, p, opts, sys)
}

/// As [`analyze`], with a principal system supplied by the caller.
pub fn analyze_with_system(
    pair: &CoefficientPair,
    sys: &PrincipalSystem,
    p: f64,
    opts: &AnalyzeOptions,
) -> Result<SolvabilityReport> {
    analyze_inner(pair, p, opts, Ok(sys.clone()))
}

fn not_applicable(reason: &str) -> Quantity {
    Quantity::NotApplicable { reason: reason.into() }
}

fn describe(q: &Quantity) -> String {
    match q {
        Quantity::Finite { value, .. } => format!("finite, {value:.6e}"),
        Quantity::Diverging { exponent: Some(e), .. } => format!("diverging, exponent {e:.4}"),
        Quantity::Diverging { .. } => "diverging".into(),
        Quantity::Vanishing { .. } => "vanishing".into(),
        Quantity::Undetermined { reason } => format!("undetermined: {reason}"),
        Quantity::NotApplicable { reason } => format!("not applicable: {reason}"),
    }
}

fn analyze_inner(
    pair: &CoefficientPair,
    p: f64,
    opts: &AnalyzeOptions,
    sys: Result<PrincipalSystem>,
) -> Result<SolvabilityReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must lie in (1, ∞), got {p}")));
    }
    let policy = &opts.trend;
    let regime = classify(pair, coefficients::IMPROPER_TOL);
    let mut evidence = Vec::new();

    let s4 = sigma4(pair, policy);
    let s5 = sigma5(pair, &regime, policy);

    let mut pfss_summary = None;
    let (d, s1, s2, s3, nonsolv) = match &sys {
        Ok(sys) => {
            pfss_summary = Some(PfssSummary {
                method: sys.method(),
                x0: sys.x0(),
                domain_lo: sys.domain().0,
                domain_hi: sys.domain().1,
                quality: sys.quality().cloned(),
                notes: sys.notes().to_vec(),
            });
            let widths = Widths::new(sys, opts.s_tol);
            let (d, _) = estimate_d_with(sys, &widths, policy);
            let sig = sigma_with(sys, &widths, pair, &regime, policy);
            let ns = check_nonsolvability(sys, pair, policy);
            (d, sig.sigma1, sig.sigma2, sig.sigma3, Some(ns))
        }
        Err(e) => {
            evidence.push(Evidence {
                criterion: "pfss",
                basis: "a principal system of the homogeneous equation",
                outcome: Outcome::Error,
                detail: e.to_string(),
            });
            let na = || not_applicable("no principal system");
            (na(), na(), na(), na(), None)
        }
    };

    let b = if opts.otelbaev && regime.condition_1_3.is_true() {
        estimate_b(pair, policy, coefficients::FINITE_TOL).unwrap_or_else(|e| Quantity::Undetermined { reason: e.to_string() })
    } else {
        not_applicable("windowed limit condition does not hold")
    };

    let sys_ok = sys.as_ref().ok();
    let (hw, reduction) = match reduce_to_model(pair, sys_ok, policy) {
        Ok(cert) => {
            let hw = hartman_wintner_check(pair, &cert.model_pair, &cert.model_sys, sys_ok);
            let (model_d, _) = estimate_d(&cert.model_sys, policy, opts.s_tol);
            (Some(hw), Some((cert, model_d)))
        }
        Err(e) => {
            if regime.inv_r_l1.is_true() {
                evidence.push(Evidence {
                    criterion: "model_reduction",
                    basis: "weak equivalence of ρ with the model ρ₁",
                    outcome: Outcome::Error,
                    detail: e.to_string(),
                });
            }
            (None, None)
        }
    };

    // Fixed priority order.
    let sup_basis = "sup ρ s finite iff correctly solvable";
    evidence.push(Evidence {
        criterion: "D",
        basis: sup_basis,
        outcome: match &d {
            Quantity::Finite { .. } => Outcome::Solvable,
            Quantity::Diverging { .. } => Outcome::NotSolvable,
            _ => Outcome::Neutral,
        },
        detail: describe(&d),
    });
    let sigmas: [(&'static str, &'static str, &Quantity, bool); 5] = [
        ("sigma1", "sup r ρ² finite is sufficient", &s1, s1.is_finite()),
        ("sigma2", "sup ρ|x| finite is sufficient", &s2, s2.is_finite()),
        ("sigma3", "positive infimum of window averages of q is sufficient", &s3, s3.is_positive()),
        ("sigma4", "inf q positive is sufficient", &s4, s4.is_positive()),
        ("sigma5", "sup r U² V² finite is sufficient", &s5, s5.is_finite()),
    ];
    for (criterion, basis, q, ok) in sigmas {
        evidence.push(Evidence {
            criterion,
            basis,
            outcome: if ok { Outcome::Solvable } else { Outcome::Neutral },
            detail: describe(q),
        });
    }
    evidence.push(Evidence {
        criterion: "B",
        basis: "sup h d finite iff correctly solvable under the windowed limit condition",
        outcome: match &b {
            Quantity::Finite { .. } => Outcome::Solvable,
            Quantity::Diverging { .. } => Outcome::NotSolvable,
            _ => Outcome::Neutral,
        },
        detail: describe(&b),
    });
    if let Some(ns) = &nonsolv {
        evidence.push(Evidence {
            criterion: "bounded_r_unbounded_r_rho",
            basis: "sup r finite and r ρ → ∞ rule out solvability",
            outcome: if ns.holds { Outcome::NotSolvable } else { Outcome::Neutral },
            detail: format!("sup r {}; r ρ {}", describe(&ns.sup_r), describe(&ns.r_rho)),
        });
    }
    let mut model_reduction = None;
    if let (Some((cert, model_d)), Some(hw)) = (&reduction, &hw) {
        let transfers = hw.i_plus.solvable() && hw.i_minus.solvable();
        let certified = transfers && (cert.c.is_none() || cert.measured());
        let outcome = match model_d {
            Quantity::Finite { .. } if certified => Outcome::Solvable,
            Quantity::Diverging { .. } if certified => Outcome::NotSolvable,
            _ => Outcome::Neutral,
        };
        let c_text = match (cert.c, &cert.c_trend) {
            (Some(c), Some(t)) if t.is_stable() => format!("c = {c:.6}"),
            (Some(c), _) => format!("c not settled (last {c:.6})"),
            _ => "c not measured".into(),
        };
        evidence.push(Evidence {
            criterion: "model_reduction",
            basis: "weak equivalence of ρ with the model ρ₁",
            outcome,
            detail: format!(
                "model D {}; J- = {:.6e}, J+ = {:.6e}; {c_text}; tails {}",
                describe(model_d),
                cert.j_minus,
                cert.j_plus,
                if transfers { "asymptotically equivalent" } else { "not certified" }
            ),
        });
        model_reduction =
            Some(ModelReduction { j_minus: cert.j_minus, j_plus: cert.j_plus, c: cert.c, model_d: model_d.clone() });
    }

    let yes = evidence.iter().any(|e| e.outcome == Outcome::Solvable);
    let no = evidence.iter().any(|e| e.outcome == Outcome::NotSolvable);
    let verdict = match (yes, no) {
        (true, false) => Verdict::CorrectlySolvable,
        (false, true) => Verdict::NotCorrectlySolvable,
        (true, true) => {
            evidence.push(Evidence {
                criterion: "concordance",
                basis: "independent criteria must agree",
                outcome: Outcome::Error,
                detail: "criteria disagree".into(),
            });
            Verdict::Inconclusive
        }
        (false, false) => Verdict::Inconclusive,
    };

    let norms = match (&sys, opts.hardy) {
        (Ok(sys), true) => Some(norm_realization(sys, p, &d, opts)?),
        _ => None,
    };

    Ok(SolvabilityReport {
        verdict,
        p,
        regime,
        pfss: pfss_summary,
        d,
        sigma1: s1,
        sigma2: s2,
        sigma3: s3,
        sigma4: s4,
        sigma5: s5,
        b,
        nonsolvability: nonsolv,
        hartman_wintner: hw,
        model_reduction,
        norms,
        evidence,
    })
}

/// Hardy bracket for `‖G‖_p`, probe witnesses, and both relative to `D`.
pub fn norm_realization(sys: &PrincipalSystem, p: f64, d: &Quantity, opts: &AnalyzeOptions) -> Result<NormRealization> {
    let kernel = GreenKernel::new(sys);
    let hardy = green::hardy_bounds(&kernel, p, &opts.trend)?;
    let upper = hardy.g1.upper + hardy.g2.upper;
    let probes = green::random_probes(opts.seed, opts.probes);
    let probe = green::empirical_norm_probe(&kernel, p, Operator::Full, &probes)?;
    let probe_max = probe.estimate.lower;
    let dv = d.value().unwrap_or(f64::NAN);
    Ok(NormRealization {
        upper,
        c_upper: upper / dv,
        probes: probes.len(),
        probe_max,
        c_probe: probe_max / dv,
        within_bracket: probe_max <= upper * (1.0 + 1e-6),
        hardy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_sys(m: f64) -> (CoefficientPair, PrincipalSystem) {
        let pair = CoefficientPair::constant(1.0, m * m).unwrap();
        let sys = construct_pfss(&pair, &PfssOptions::default()).unwrap();
        (pair, sys)
    }

    #[test]
    fn d_constant_closed_form() {
        for m in [0.5, 1.0, 2.0] {
            let (_, sys) = constant_sys(m);
            let (d, _) = estimate_d(&sys, &TrendPolicy::default(), S_TOL);
            let want = 1.0 / (8.0 * m * m);
            assert!((d.value().unwrap() - want).abs() < 1e-6 * want, "{d:?}");
        }
    }

    #[test]
    fn d_model_alpha_one() {
        let sys = model_pfss(&CoefficientPair::power_law(1.0, 1.0).unwrap()).unwrap();
        let (d, rec) = estimate_d(&sys, &TrendPolicy::default(), S_TOL);
        assert!(d.is_finite(), "{d:?}");
        let far = rec.samples.iter().filter(|s| s.0 > 100.0).map(|s| s.1).fold(0.0, f64::max);
        assert!((far - 0.5f64.tanh()).abs() < 0.01, "{far}");
    }

    #[test]
    fn d_model_diverges_with_exponent() {
        for alpha in [0.6, 0.75, 0.9] {
            let sys = model_pfss(&CoefficientPair::power_law(alpha, 1.0).unwrap()).unwrap();
            let (d, _) = estimate_d(&sys, &TrendPolicy::default(), S_TOL);
            let e = d.exponent().unwrap_or(f64::NAN);
            assert!(d.is_diverging() && (e - 2.0 * (1.0 - alpha)).abs() < 0.15, "{alpha}: {d:?}");
        }
    }

    #[test]
    fn b_constant_and_regime_gate() {
        for m in [1.0, 2.0] {
            let (pair, _) = constant_sys(m);
            let b = estimate_b(&pair, &TrendPolicy::default(), 1e-12).unwrap();
            assert!((b.value().unwrap() - 1.0 / (8.0 * m * m)).abs() < 1e-9);
        }
        let pl = CoefficientPair::power_law(1.0, 1.0).unwrap();
        assert_eq!(estimate_b(&pl, &TrendPolicy::default(), 1e-12).unwrap_err(), Error::RegimeError);
    }

    #[test]
    fn sigma_on_constant_and_model() {
        let (pair, sys) = constant_sys(1.0);
        let prof = classify(&pair, 1e-10);
        let sig = sigma_criteria(&sys, &pair, &prof, &TrendPolicy::default(), S_TOL);
        assert_eq!(sig.sigma4.value(), Some(1.0));
        assert!((sig.sigma3.value().unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(sig.sigma5, Quantity::NotApplicable { .. }));

        let pl = CoefficientPair::power_law(0.75, 1.0).unwrap();
        let model = model_pfss(&pl).unwrap();
        let prof = classify(&pl.model(), 1e-10);
        let sig = sigma_criteria(&model, &pl.model(), &prof, &TrendPolicy::default(), S_TOL);
        assert!(sig.sigma2.is_diverging());
        let e = sig.sigma2.exponent().unwrap();
        assert!((e - 0.5).abs() < 0.1, "{e}");
    }

    #[test]
    fn sigma5_tails() {
        let policy = TrendPolicy::default();
        let one = CoefficientPair::power_law(1.0, 1.0).unwrap();
        let s = sigma5(&one, &classify(&one, 1e-10), &policy);
        assert!(s.is_finite(), "{s:?}");
        let steep = CoefficientPair::power_law(1.5, 1.0).unwrap();
        assert!(sigma5(&steep, &classify(&steep, 1e-10), &policy).is_finite());
    }

    #[test]
    fn hartman_wintner_power_counting() {
        for (a, b) in [(1.0, 1.0), (0.6, 0.6)] {
            let pair = CoefficientPair::power_law(a, b).unwrap();
            let model = model_pfss(&pair).unwrap();
            let hw = hartman_wintner_check(&pair, &pair.model(), &model, None);
            assert!(matches!(hw.i_plus, Convergence::Absolute { .. }), "{:?}", hw.i_plus);
            assert!(matches!(hw.i_minus, Convergence::Absolute { .. }));
        }
        let pair = CoefficientPair::power_law(1.0, 1.0).unwrap().model();
        let model = model_pfss(&pair).unwrap();
        let hw = hartman_wintner_check(&pair, &pair, &model, None);
        assert_eq!(hw.i_plus, Convergence::Absolute { value: 0.0 });
    }

    #[test]
    fn reduction_gates() {
        let policy = TrendPolicy::default();
        let (pair, _) = constant_sys(1.0);
        assert!(matches!(reduce_to_model(&pair, None, &policy), Err(Error::ReductionUnavailable(_))));
        let model = CoefficientPair::power_law(1.0, 1.0).unwrap().model();
        let cert = reduce_to_model(&model, None, &policy).unwrap();
        assert_eq!(cert.c, Some(1.0));
        assert_eq!(cert.j_plus, 0.0);
    }

    #[test]
    fn analyze_constant() {
        let (pair, _) = constant_sys(1.0);
        let rep = analyze(&pair, 2.0, &AnalyzeOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::CorrectlySolvable);
        assert!((rep.d.value().unwrap() - 0.125).abs() < 1e-6);
        assert!((rep.b.value().unwrap() - 0.125).abs() < 1e-6);
    }

    #[test]
    fn rescaling_leaves_report_unchanged() {
        let (pair, sys) = constant_sys(1.0);
        let opts = AnalyzeOptions::default();
        let a = analyze_with_system(&pair, &sys, 2.0, &opts).unwrap();
        let b = analyze_with_system(&pair, &sys.rescaled(0.125), 2.0, &opts).unwrap();
        let strip = |mut r: SolvabilityReport| {
            r.pfss = None;
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(strip(a), strip(b));
    }

    #[test]
    fn invalid_p_rejected() {
        let (pair, _) = constant_sys(1.0);
        assert!(analyze(&pair, 1.0, &AnalyzeOptions::default()).is_err());
    }
}

//! Invariant suites: every identity and inequality the construction must
//! satisfy, measured on one pair and reported check by check.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::auxiliary::{build_covering, compute_s, covering_identity, Direction, OtelbaevProfile, S_TOL};
use crate::coefficients::{self, classify, CoefficientPair, TailLaw, Truncation};
use crate::error::{Error, Result};
use crate::green::GreenKernel;
use crate::pfss::{davies_harrell_reconstruct, verify_pfss, Method, PrincipalSystem};
use crate::quad::{self, Tolerance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed: measured <= threshold, measured, threshold, detail: detail.into() }
    }

    fn failed(name: &str, threshold: f64, err: &Error) -> Self {
        Check { name: name.into(), passed: false, measured: f64::NAN, threshold, detail: err.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub label: String,
    pub method: Method,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random abscissae are drawn from `[-radius, radius]`.
    pub radius: f64,
    pub lipschitz_pairs: usize,
    pub windows: usize,
    pub covering_segments: usize,
    pub mass_points: usize,
    pub otelbaev_points: usize,
    pub kernel_pairs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            radius: 100.0,
            lipschitz_pairs: 100,
            windows: 50,
            covering_segments: 50,
            mass_points: 50,
            otelbaev_points: 50,
            kernel_pairs: 50,
        }
    }
}

pub const WRONSKIAN_TOL: f64 = 1e-6;
pub const R_RHO_PRIME_TOL: f64 = 1e-6;
pub const DH_EXPLICIT_TOL: f64 = 1e-6;
pub const DH_MATCHED_TOL: f64 = 1e-3;
pub const LIPSCHITZ_TOL: f64 = 1e-9;
pub const COVERING_TOL: f64 = 1e-8;
pub const MASS_TOL: f64 = 1e-6;

/// `r ≡ 1`, `q = (1 + x²)^{-1}`.
pub fn unit_r_inverse_square_q() -> CoefficientPair {
    CoefficientPair::composite(
        "r=1, q=1/(1+x^2)",
        Arc::new(|_| 1.0),
        Some(Arc::new(|x: f64| 1.0 / (1.0 + x * x))),
        Truncation::symmetric(1.0, TailLaw::Power(0.0), TailLaw::Power(-2.0)),
        vec![],
    )
}

/// `r ≡ 1` and `q` a smooth bump of height `amp` supported in `[-1, 1]`.
pub fn unit_r_bump_q(amp: f64) -> CoefficientPair {
    CoefficientPair::composite(
        "r=1, q=bump",
        Arc::new(|_| 1.0),
        Some(Arc::new(move |x: f64| if x.abs() < 1.0 { amp * (1.0 - x * x).powi(2) } else { 0.0 })),
        Truncation::symmetric(1.0, TailLaw::Power(0.0), TailLaw::Zero),
        vec![-1.0, 0.0, 1.0],
    )
}

fn grid(sys: &PrincipalSystem, radius: f64) -> Vec<f64> {
    let mut g = vec![0.0];
    let mut x = 0.125;
    while x <= radius {
        for y in [x, -x, 1.5 * x, -1.5 * x] {
            // closed-form exponentials overflow long before the radius
            let representable = !sys.is_closed_form() || (sys.u(y).is_normal() && sys.v(y).is_normal());
            if sys.contains(y) && y.abs() <= radius && representable {
                g.push(y);
            }
        }
        x *= 2.0;
    }
    g.sort_by(f64::total_cmp);
    g
}

fn random_points(rng: &mut ChaCha8Rng, sys: &PrincipalSystem, radius: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = sys.domain();
    let (lo, hi) = (lo.max(-radius), hi.min(radius));
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Runs every suite that applies to `sys`.
pub fn run_suite(label: &str, sys: &PrincipalSystem, opts: &VerifyOptions) -> SuiteReport {
    let pair = sys.pair().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();
    let g = grid(sys, opts.radius.max(1000.0));

    let q = verify_pfss(sys, &g);
    checks.push(Check::at_most("wronskian", q.max_wronskian_dev, WRONSKIAN_TOL, format!("{} points", q.points)));
    checks.push(Check::at_most(
        "signs_and_monotonicity",
        (q.sign_violations + q.monotonicity_violations) as f64,
        0.0,
        "u, v > 0, u' ≤ 0, v' ≥ 0",
    ));
    checks.push(Check::at_most("r_rho_prime", q.max_r_rho_prime, 1.0 + R_RHO_PRIME_TOL, "max r|ρ'|"));
    checks.push(Check::at_most(
        "log_derivative_identity",
        q.max_log_derivative_dev,
        1e-4,
        "u'/u against -(1 - r ρ')/(2 r ρ), relative to 1/(r ρ)",
    ));
    checks.push(Check::at_most("ratio_monotone", if q.ratio_trend_ok { 0.0 } else { 1.0 }, 0.0, "u/v decreasing"));
    checks.push(Check::at_most(
        "rescaling_exact",
        if q.scaling_exact { 0.0 } else { 1.0 },
        0.0,
        format!("ρ of (a u, v/a), a = {}", q.scale_used),
    ));

    checks.push(davies_harrell_check(sys));
    checks.push(width_equation_check(sys, &mut rng, opts));

    match lipschitz(sys, &mut rng, opts) {
        Ok(c) => checks.push(c),
        Err(e) => checks.push(Check::failed("s_lipschitz", 1.0 + LIPSCHITZ_TOL, &e)),
    }
    checks.push(local_equivalence(sys, &mut rng, opts));
    for dir in [Direction::Rightward, Direction::Leftward] {
        checks.push(covering_check(sys, dir, opts));
    }
    checks.push(kernel_mass_check(sys, &mut rng, opts));
    checks.push(kernel_form_check(sys, &mut rng, opts));
    if classify(&pair, coefficients::IMPROPER_TOL).condition_1_3.is_true() {
        checks.push(otelbaev_check(sys, &mut rng, opts));
    }

    let passed = checks.iter().all(|c| c.passed);
    SuiteReport { label: label.into(), method: sys.method(), passed, checks }
}

fn davies_harrell_check(sys: &PrincipalSystem) -> Check {
    let tol = if sys.method() == Method::AsymptoticMatching { DH_MATCHED_TOL } else { DH_EXPLICIT_TOL };
    let s2 = sys.clone();
    let dh = davies_harrell_reconstruct(Arc::new(move |x| s2.rho(x)), sys.x0(), sys.pair());
    let mut worst: f64 = 0.0;
    for i in 0..=40 {
        let x = -50.0 + 2.5 * i as f64;
        if !sys.contains(x) {
            continue;
        }
        match (dh.u(x), dh.v(x)) {
            (Ok(u), Ok(v)) => {
                worst = worst.max((u / sys.u(x) - 1.0).abs()).max((v / sys.v(x) - 1.0).abs());
            }
            (Err(e), _) | (_, Err(e)) => return Check::failed("davies_harrell_round_trip", tol, &e),
        }
    }
    Check::at_most("davies_harrell_round_trip", worst, tol, "relative deviation of u, v on [-50, 50]")
}

/// `∫_{x-s}^{x+s} dt/(r ρ) = 1` with the integral taken by quadrature.
fn width_equation_check(sys: &PrincipalSystem, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Check {
    let pair = sys.pair();
    let mut worst: f64 = 0.0;
    for x in random_points(rng, sys, opts.radius, 20) {
        let s = match compute_s(sys, x, S_TOL) {
            Ok(s) => s,
            Err(e) => return Check::failed("width_equation", 1e-6, &e),
        };
        let f = |t: f64| 1.0 / (pair.r(t) * sys.rho(t));
        match quad::integrate_finite(&f, x - s, x + s, &[x], Tolerance::new(1e-13, 1e-11)) {
            Ok(e) => worst = worst.max((e.value - 1.0).abs()),
            Err(e) => return Check::failed("width_equation", 1e-6, &e),
        }
    }
    Check::at_most("width_equation", worst, 1e-6, "|F(s) - 1| by quadrature at 20 points")
}

fn lipschitz(sys: &PrincipalSystem, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let pts = random_points(rng, sys, opts.radius, opts.lipschitz_pairs);
    for x in pts {
        let sx = compute_s(sys, x, S_TOL)?;
        let t = rng.gen_range(-sx..=sx);
        if t == 0.0 || !sys.contains(x + t) {
            continue;
        }
        let st = compute_s(sys, x + t, S_TOL)?;
        worst = worst.max((st - sx).abs() / t.abs());
    }
    Ok(Check::at_most(
        "s_lipschitz",
        worst,
        1.0 + LIPSCHITZ_TOL,
        format!("{} pairs, |s(x) - s(t)| / |x - t|", opts.lipschitz_pairs),
    ))
}

/// `e^{-1} ρ(x) ≤ ρ(t) ≤ e ρ(x)` and the same for `u` and `v` on windows.
fn local_equivalence(sys: &PrincipalSystem, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Check {
    let mut worst: f64 = 0.0;
    for x in random_points(rng, sys, opts.radius, opts.windows) {
        let s = match compute_s(sys, x, S_TOL) {
            Ok(s) => s,
            Err(e) => return Check::failed("local_equivalence", 1.0, &e),
        };
        for _ in 0..4 {
            let t = x + rng.gen_range(-s..=s);
            for (a, b) in [(sys.rho(t), sys.rho(x)), (sys.u(t), sys.u(x)), (sys.v(t), sys.v(x))] {
                worst = worst.max((a / b).ln().abs());
            }
        }
    }
    Check::at_most(
        "local_equivalence",
        worst,
        1.0 + 1e-9,
        format!("max |ln(g(t)/g(x))| over {} windows, g = ρ, u, v", opts.windows),
    )
}

fn covering_check(sys: &PrincipalSystem, dir: Direction, opts: &VerifyOptions) -> Check {
    let name = match dir {
        Direction::Rightward => "covering_identity_right",
        Direction::Leftward => "covering_identity_left",
    };
    let kappa = |y: f64| compute_s(sys, y, S_TOL);
    let (cov, note) = match build_covering(sys, 0.0, &kappa, dir, opts.covering_segments) {
        Ok(c) => (c, String::new()),
        Err(Error::CoveringStalled { partial }) => {
            let n = partial.segments.len();
            (partial, format!(", stopped at the edge of the numerical domain after {n} segments"))
        }
        Err(e) => return Check::failed(name, COVERING_TOL, &e),
    };
    if cov.segments.is_empty() {
        return Check::failed(name, COVERING_TOL, &Error::BracketingFailed("no segment could be built".into()));
    }
    // Allowance n·tol for segment n.
    let worst = covering_identity(sys, &cov)
        .iter()
        .enumerate()
        .map(|(i, d)| d / (i + 1) as f64)
        .fold(0.0, f64::max);
    Check::at_most(name, worst, COVERING_TOL, format!("max deviation / n over {} segments{note}", cov.segments.len()))
}

fn kernel_mass_check(sys: &PrincipalSystem, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Check {
    let kernel = GreenKernel::new(sys);
    let constant = sys.pair().as_constant().is_some();
    let mut worst: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for x in random_points(rng, sys, opts.radius, opts.mass_points) {
        match kernel.potential_mass(x) {
            Ok(m) => {
                worst = worst.max(m);
                worst_gap = worst_gap.max((m - 1.0).abs());
            }
            Err(e) => return Check::failed("kernel_mass", 1.0 + MASS_TOL, &e),
        }
    }
    if constant {
        return Check::at_most("kernel_mass", worst_gap, MASS_TOL, "|∫ q G(x, ·) - 1| for constant coefficients");
    }
    Check::at_most("kernel_mass", worst, 1.0 + MASS_TOL, format!("max ∫ q G(x, ·) at {} points", opts.mass_points))
}

/// Symmetry of `G` and agreement of the product form with the exponential
/// form built from `ρ` alone.
fn kernel_form_check(sys: &PrincipalSystem, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Check {
    let kernel = GreenKernel::new(sys);
    let r = opts.radius.min(20.0);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.kernel_pairs {
        let (x, t) = (rng.gen_range(-r..=r), rng.gen_range(-r..=r));
        if !(sys.contains(x) && sys.contains(t)) {
            continue;
        }
        let g = kernel.eval(x, t);
        let sym = (g / kernel.eval(t, x) - 1.0).abs();
        let dh = match kernel.eval_dh(x, t) {
            Ok(v) => (v / g - 1.0).abs(),
            Err(e) => return Check::failed("kernel_forms", 1e-8, &e),
        };
        worst = worst.max(sym).max(dh);
    }
    let tol = if sys.method() == Method::AsymptoticMatching { 1e-6 } else { 1e-8 };
    Check::at_most("kernel_forms", worst, tol, "G(x,t) = G(t,x) and product form against exponential form")
}

fn otelbaev_check(sys: &PrincipalSystem, rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> Check {
    let prof = match OtelbaevProfile::new(sys.pair(), 1e-12) {
        Ok(p) => p,
        Err(e) => return Check::failed("otelbaev_bounds", 1.0, &e),
    };
    let mut worst: f64 = 0.0;
    for x in random_points(rng, sys, opts.radius, opts.otelbaev_points) {
        match prof.h(x) {
            Ok(h) => worst = worst.max((sys.rho(x) / h).ln().abs()),
            Err(e) => return Check::failed("otelbaev_bounds", 2f64.ln(), &e),
        }
    }
    Check::at_most(
        "otelbaev_bounds",
        worst,
        2f64.ln(),
        format!("max |ln(ρ/h)| at {} points; h/2 ≤ ρ ≤ 2h", opts.otelbaev_points),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfss::{construct_pfss, model_pfss, PfssOptions};

    fn assert_all_pass(rep: &SuiteReport) {
        for c in &rep.checks {
            assert!(c.passed, "{}: {} > {} ({})", c.name, c.measured, c.threshold, c.detail);
        }
    }

    #[test]
    fn constant_suite_passes() {
        let pair = CoefficientPair::constant(1.0, 1.0).unwrap();
        let sys = construct_pfss(&pair, &PfssOptions::default()).unwrap();
        let rep = run_suite("constant", &sys, &VerifyOptions::default());
        assert_all_pass(&rep);
        assert!(rep.check("otelbaev_bounds").is_some());
    }

    #[test]
    fn model_suite_passes() {
        let sys = model_pfss(&CoefficientPair::power_law(1.0, 1.0).unwrap()).unwrap();
        assert_all_pass(&run_suite("model", &sys, &VerifyOptions::default()));
    }

    #[test]
    fn corrupted_system_fails_wronskian() {
        let pair = CoefficientPair::constant(1.0, 1.0).unwrap();
        let sys = construct_pfss(&pair, &PfssOptions::default()).unwrap().with_u_scaled(1.5);
        let rep = run_suite("corrupt", &sys, &VerifyOptions::default());
        assert!(!rep.check("wronskian").unwrap().passed);
        assert!(!rep.passed);
    }
}

//! The width function `s(x)`, the Otelbaev functions `h(x)`, `d(x)`, and
//! coverings of a half-line by abutting segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coefficients::{self, classify, CoefficientPair};
use crate::error::{Error, Result};
use crate::pfss::PrincipalSystem;
use crate::quad::{self, Tolerance};
use crate::roots;

pub const S_TOL: f64 = 1e-10;

/// The unique `s > 0` with `∫_{x-s}^{x+s} dt/(rρ) = 1`.
pub fn compute_s(sys: &PrincipalSystem, x: f64, tol: f64) -> Result<f64> {
    sys.check_domain(x)?;
    let f = |s: f64| -> Result<f64> {
        if !(sys.contains(x - s) && sys.contains(x + s)) {
            return Err(Error::BracketingFailed(format!(
                "window [{}, {}] leaves the numerical domain",
                x - s,
                x + s
            )));
        }
        let v = sys.inv_r_rho_integral(x - s, x + s);
        if v.is_nan() {
            return Err(Error::BracketingFailed(format!("F undefined at s = {s}")));
        }
        Ok(v - 1.0)
    };
    let (lo, hi) = roots::expand_upward(f, 0.0, 1.0, f64::MAX)?;
    let s = roots::bisect(f, lo, hi, 0.0)?;
    let residual = f(s)?.abs();
    if residual > tol {
        return Err(Error::BracketingFailed(format!(
            "|F(s) - 1| = {residual:e} exceeds {tol:e} at x = {x}"
        )));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

/// Sampled `s(x)` with a Lipschitz certificate and the growth record
/// `x ∓ s(x)`.
#[derive(Debug, Clone)]
pub struct WidthProfile {
    sys: PrincipalSystem,
    samples: Vec<(f64, f64)>,
    pub lipschitz_certificate: f64,
    pub lipschitz_pairs: usize,
    pub growth_trend: Vec<GrowthPoint>,
    /// Smallest `c` with `s(x) ≤ c (1 + |x|)` on the samples.
    pub linear_growth_constant: f64,
}

impl WidthProfile {
    pub fn build(sys: &PrincipalSystem, grid: &[f64], seed: u64, pairs: usize) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len());
        for &x in grid {
            samples.push((x, compute_s(sys, x, S_TOL)?));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let growth_trend = samples.iter().map(|&(x, s)| GrowthPoint { x, left: x - s, right: x + s }).collect();
        let linear_growth_constant = samples.iter().map(|&(x, s)| s / (1.0 + x.abs())).fold(0.0, f64::max);
        let mut profile = WidthProfile {
            sys: sys.clone(),
            samples,
            lipschitz_certificate: 0.0,
            lipschitz_pairs: 0,
            growth_trend,
            linear_growth_constant,
        };
        if let (Some(&(lo, _)), Some(&(hi, _))) = (profile.samples.first(), profile.samples.last()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..pairs {
                let x = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                let sx = compute_s(sys, x, S_TOL)?;
                let t = rng.gen_range(-sx..=sx);
                if t == 0.0 {
                    continue;
                }
                let st = compute_s(sys, x + t, S_TOL)?;
                profile.lipschitz_certificate = profile.lipschitz_certificate.max((st - sx).abs() / t.abs());
                profile.lipschitz_pairs += 1;
            }
        }
        Ok(profile)
    }

    /// `s(x)` from the root finder.
    pub fn s(&self, x: f64) -> Result<f64> {
        compute_s(&self.sys, x, S_TOL)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Linear interpolation of the samples, for plotting only.
    pub fn interpolated(&self, x: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || x < s[0].0 || x > s[s.len() - 1].0 {
            return None;
        }
        let i = s.partition_point(|p| p.0 <= x);
        if i == 0 || i == s.len() {
            return Some(s[i.min(s.len() - 1)].1);
        }
        let (a, b) = (s[i - 1], s[i]);
        Some(a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1))
    }

    /// Rows `x, s` for the CSV dump.
    pub fn table(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|&(x, s)| vec![x, s]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OtelbaevPoint {
    pub d1: f64,
    pub d2: f64,
    pub phi: f64,
    pub psi: f64,
    pub h: f64,
}

/// `d1, d2, φ, ψ, h` and `d` for pairs satisfying the windowed limit
/// condition.
#[derive(Debug, Clone)]
pub struct OtelbaevProfile {
    pair: CoefficientPair,
    tol: f64,
}

impl OtelbaevProfile {
    pub fn new(pair: &CoefficientPair, tol: f64) -> Result<Self> {
        if !classify(pair, coefficients::IMPROPER_TOL).condition_1_3.is_true() {
            return Err(Error::RegimeError);
        }
        Ok(OtelbaevProfile { pair: pair.clone(), tol })
    }

    pub fn pair(&self) -> &CoefficientPair {
        &self.pair
    }

    fn window_root(&self, x: f64, left: bool) -> Result<f64> {
        let pair = &self.pair;
        let tol = self.tol;
        let g = |d: f64| -> Result<f64> {
            let (a, b) = if left { (x - d, x) } else { (x, x + d) };
            Ok(pair.integrate_inv_r(a, b, tol)? * pair.integrate_q(a, b, tol)? - 1.0)
        };
        let (lo, hi) = roots::expand_upward(g, 0.0, 1.0, 1e300)?;
        roots::bisect(g, lo, hi, 0.0)
    }

    pub fn point(&self, x: f64) -> Result<OtelbaevPoint> {
        let d1 = self.window_root(x, true)?;
        let d2 = self.window_root(x, false)?;
        let phi = self.pair.integrate_inv_r(x - d1, x, self.tol)?;
        let psi = self.pair.integrate_inv_r(x, x + d2, self.tol)?;
        Ok(OtelbaevPoint { d1, d2, phi, psi, h: phi * psi / (phi + psi) })
    }

    pub fn h(&self, x: f64) -> Result<f64> {
        Ok(self.point(x)?.h)
    }

    /// The unique `d > 0` with `∫_{x-d}^{x+d} dt/(r h) = 1`.
    pub fn d(&self, x: f64) -> Result<f64> {
        compute_d(&self.pair, &|t| self.h(t), x, self.tol)
    }
}

pub fn compute_otelbaev(pair: &CoefficientPair, x: f64, tol: f64) -> Result<OtelbaevPoint> {
    OtelbaevProfile::new(pair, tol)?.point(x)
}

pub fn compute_d(pair: &CoefficientPair, h: &dyn Fn(f64) -> Result<f64>, x: f64, tol: f64) -> Result<f64> {
    if let Some((r0, _)) = pair.as_constant() {
        // h is constant as well; the defining integral is 2d/(r0 h).
        return Ok(0.5 * r0 * h(x)?);
    }
    let g = |d: f64| -> Result<f64> {
        let failure = std::cell::Cell::new(None);
        let integrand = |t: f64| match h(t) {
            Ok(v) => 1.0 / (pair.r(t) * v),
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        let est = quad::integrate_finite(&integrand, x - d, x + d, &[x], Tolerance::new(tol, 1e-10));
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(est?.value - 1.0)
    };
    let (lo, hi) = roots::expand_upward(g, 0.0, 1.0, 1e300)?;
    roots::bisect(g, lo, hi, 1e-12 * hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Leftward,
    Rightward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Covering {
    pub direction: Direction,
    pub anchor: f64,
    /// `(center, half-width)` pairs in order of construction.
    pub segments: Vec<(f64, f64)>,
    /// `edges[0]` is the anchor and `edges[n]` the outer endpoint of
    /// segment `n`, shared with segment `n + 1`.
    pub edges: Vec<f64>,
}

impl Covering {
    /// Endpoint of segment `n` (1-based) nearest the anchor.
    pub fn inner_edge(&self, n: usize) -> f64 {
        self.edges[n - 1]
    }

    pub fn outer_edge(&self, n: usize) -> f64 {
        self.edges[n]
    }
}

/// Chains segments of half-width `kappa(center)` from the anchor outward,
/// each starting where the previous one ends.
pub fn build_covering(
    sys: &PrincipalSystem,
    x: f64,
    kappa: &dyn Fn(f64) -> Result<f64>,
    direction: Direction,
    n_max: usize,
) -> Result<Covering> {
    let sign = match direction {
        Direction::Rightward => 1.0,
        Direction::Leftward => -1.0,
    };
    let mut cov = Covering { direction, anchor: x, segments: Vec::with_capacity(n_max), edges: vec![x] };
    let mut edge = x;
    for _ in 0..n_max {
        let stalled = |cov: &Covering| Error::CoveringStalled { partial: cov.clone() };
        if !sys.contains(edge) {
            return Err(stalled(&cov));
        }
        // center y = edge + sign δ with δ = kappa(y)
        let g = |delta: f64| -> Result<f64> { Ok(delta - kappa(edge + sign * delta)?) };
        let k0 = match kappa(edge) {
            Ok(k) if k > 0.0 && k.is_finite() => k,
            _ => return Err(stalled(&cov)),
        };
        let bracket = roots::expand_upward(g, 0.0, k0, f64::MAX);
        let (lo, hi) = match bracket {
            Ok(b) => b,
            Err(_) => return Err(stalled(&cov)),
        };
        let delta = match roots::bisect(g, lo, hi, 0.0) {
            Ok(d) => d,
            Err(_) => return Err(stalled(&cov)),
        };
        let center = edge + sign * delta;
        let half = match kappa(center) {
            Ok(k) => k,
            Err(_) => return Err(stalled(&cov)),
        };
        let next = center + sign * half;
        if !(half > f64::EPSILON * (1.0 + center.abs())) || (next - edge) * sign <= 0.0 {
            return Err(stalled(&cov));
        }
        cov.segments.push((center, half));
        cov.edges.push(next);
        edge = next;
    }
    Ok(cov)
}

/// For `kappa = s`: deviation of `∫ dt/(rρ)` from the anchor to the inner
/// edge of segment `n` from `n - 1`, for every segment.
pub fn covering_identity(sys: &PrincipalSystem, cov: &Covering) -> Vec<f64> {
    (1..=cov.segments.len())
        .map(|n| {
            let edge = cov.inner_edge(n);
            let mass = match cov.direction {
                Direction::Rightward => sys.inv_r_rho_integral(cov.anchor, edge),
                Direction::Leftward => sys.inv_r_rho_integral(edge, cov.anchor),
            };
            (mass - (n as f64 - 1.0)).abs()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfss::{construct_pfss, model_pfss, PfssOptions};
    use std::sync::Arc;

    fn constant(m: f64) -> PrincipalSystem {
        construct_pfss(&CoefficientPair::constant(1.0, m * m).unwrap(), &PfssOptions::default()).unwrap()
    }

    #[test]
    fn constant_width() {
        for &m in &[0.5, 1.0, 2.0] {
            let sys = constant(m);
            for &x in &[-10.0, 0.0, 3.3] {
                let s = compute_s(&sys, x, S_TOL).unwrap();
                assert!((s - 0.25 / m).abs() < 1e-14, "{m} {x} {s}");
            }
        }
    }

    #[test]
    fn model_width_ratio() {
        let sys = model_pfss(&CoefficientPair::power_law(1.0, 1.0).unwrap()).unwrap();
        let s = compute_s(&sys, 1e3, S_TOL).unwrap();
        assert!((s / 1e3 - 0.5f64.tanh()).abs() < 0.02 * 0.5f64.tanh());
    }

    #[test]
    fn defining_equation_by_quadrature() {
        let pair = CoefficientPair::power_law(1.0, 1.0).unwrap();
        let sys = model_pfss(&pair).unwrap();
        for &x in &[-40.0, -1.0, 0.0, 2.0, 300.0] {
            let s = compute_s(&sys, x, S_TOL).unwrap();
            let f = |t: f64| 1.0 / (pair.r(t) * sys.rho(t));
            let v = quad::integrate_finite(&f, x - s, x + s, &[], Tolerance::relative(1e-12)).unwrap().value;
            assert!((v - 1.0).abs() < 1e-9, "{x}: {v}");
        }
    }

    #[test]
    fn otelbaev_constant() {
        for &m in &[0.5, 1.0, 2.0] {
            let pair = CoefficientPair::constant(1.0, m * m).unwrap();
            let p = compute_otelbaev(&pair, 0.7, 1e-12).unwrap();
            assert!((p.d1 - 1.0 / m).abs() < 1e-12);
            assert!((p.d2 - 1.0 / m).abs() < 1e-12);
            assert!((p.phi - 1.0 / m).abs() < 1e-12);
            assert!((p.h - 0.5 / m).abs() < 1e-12);
            let prof = OtelbaevProfile::new(&pair, 1e-12).unwrap();
            assert!((prof.d(0.7).unwrap() - 0.25 / m).abs() < 1e-12);
        }
    }

    #[test]
    fn otelbaev_regime_gate() {
        let pair = CoefficientPair::power_law(1.0, 1.0).unwrap();
        assert_eq!(compute_otelbaev(&pair, 0.0, 1e-10).unwrap_err(), Error::RegimeError);
    }

    #[test]
    fn otelbaev_general_d_matches_fast_path_on_constants() {
        let pair = CoefficientPair::composite(
            "flat",
            Arc::new(|_| 1.0),
            Some(Arc::new(|_| 4.0)),
            coefficients::Truncation::symmetric(0.0, coefficients::TailLaw::Power(0.0), coefficients::TailLaw::Power(0.0)),
            vec![],
        );
        let prof = OtelbaevProfile::new(&pair, 1e-12).unwrap();
        assert!((prof.h(1.0).unwrap() - 0.25).abs() < 1e-10);
        assert!((prof.d(1.0).unwrap() - 0.125).abs() < 1e-9);
    }

    #[test]
    fn covering_of_constant_system() {
        let sys = constant(1.0);
        let kappa = |x: f64| compute_s(&sys, x, S_TOL);
        let cov = build_covering(&sys, 0.0, &kappa, Direction::Rightward, 50).unwrap();
        for (n, &(c, k)) in cov.segments.iter().enumerate() {
            let n = n as f64 + 1.0;
            assert!((c - (2.0 * n - 1.0) / 4.0).abs() < 1e-12);
            assert!((k - 0.25).abs() < 1e-14);
        }
        for (n, dev) in covering_identity(&sys, &cov).into_iter().enumerate() {
            assert!(dev <= (n + 1) as f64 * 1e-8);
        }
        let left = build_covering(&sys, 0.0, &kappa, Direction::Leftward, 5).unwrap();
        assert!((left.segments[0].0 + 0.25).abs() < 1e-12);
    }

    #[test]
    fn covering_with_half_width_one_half() {
        let sys = constant(1.0);
        let kappa = |_x: f64| Ok(0.5);
        let cov = build_covering(&sys, 0.0, &kappa, Direction::Rightward, 10).unwrap();
        for (n, &(c, _)) in cov.segments.iter().enumerate() {
            assert!((c - (n as f64 + 0.5)).abs() < 1e-12);
        }
        for n in 1..10 {
            assert_eq!(cov.outer_edge(n), cov.inner_edge(n + 1));
        }
    }

    #[test]
    fn covering_stalls_on_vanishing_width() {
        let sys = constant(1.0);
        let kappa = |x: f64| Ok(if x > 2.0 { 0.0 } else { 0.5 });
        match build_covering(&sys, 0.0, &kappa, Direction::Rightward, 10) {
            Err(Error::CoveringStalled { partial }) => assert!(!partial.segments.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn width_profile_certificates() {
        let sys = model_pfss(&CoefficientPair::power_law(1.0, 1.0).unwrap()).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| -100.0 + 5.0 * i as f64).collect();
        let w = WidthProfile::build(&sys, &grid, 7, 100).unwrap();
        assert!(w.lipschitz_certificate <= 1.0 + 1e-9, "{}", w.lipschitz_certificate);
        assert!(w.linear_growth_constant < 1.0);
        assert!(w.samples().iter().all(|&(_, s)| s > 0.0));
        let mid = w.interpolated(2.5).unwrap();
        assert!(mid > 0.0);
    }
}

//! Adaptive Gauss–Kronrod quadrature.
//!
//! Finite ranges use a global adaptive 21-point Gauss–Kronrod scheme.
//! Semi-infinite ranges are mapped by `t = c + s (e^y - 1)` and integrated
//! window by window in `y`; the loop stops once the window contributions
//! decay geometrically below tolerance and reports divergence when they
//! do not.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    pub const fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub const fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_292_236_290,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7, 9.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const MAX_SEGMENTS: usize = 5000;
// Each Kronrod estimate carries an error floor of 50 eps |f|; asking for
// less than a small multiple of it only burns evaluations.
const ROUNDOFF: f64 = 200.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn check(at: f64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { at })
    }
}

fn gk21<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = check(center, f(center))?;
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let f1 = check(x1, f(x1))?;
        let f2 = check(x2, f(x2))?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment { a, b, value, error })
}

/// Adaptive quadrature on a finite interval, with optional interior
/// breakpoints where the integrand may have kinks.
pub fn integrate_finite<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite quadrature called on [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if a > b {
        let e = integrate_finite(f, b, a, breaks, tol)?;
        return Ok(Estimate { value: -e.value, ..e });
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut heap = BinaryHeap::new();
    let mut lo = a;
    let mut evaluations = 0;
    for &p in pts.iter().chain(std::iter::once(&b)) {
        heap.push(gk21(f, lo, p)?);
        evaluations += 21;
        lo = p;
    }
    let mut value: f64 = heap.iter().map(|s| s.value).sum();
    let mut error: f64 = heap.iter().map(|s| s.error).sum();
    let mut steps = 0usize;
    let mut resabs: f64 = heap.iter().map(|s| s.value.abs()).sum();
    while error > tol.target(value).max(ROUNDOFF * resabs) && heap.len() < MAX_SEGMENTS {
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk21(f, worst.a, mid)?;
        let right = gk21(f, mid, worst.b)?;
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        steps += 1;
        resabs += left.value.abs() + right.value.abs() - worst.value.abs();
        if steps % 64 == 0 {
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
            resabs = heap.iter().map(|s| s.value.abs()).sum();
        }
    }
    value = heap.iter().map(|s| s.value).sum();
    error = heap.iter().map(|s| s.error).sum();
    resabs = heap.iter().map(|s| s.value.abs()).sum();
    if error > tol.target(value) && error > 100.0 * tol.target(value).max(1e-9 * resabs) {
        return Err(Error::QuadratureFailed { value, error });
    }
    Ok(Estimate { value, error, evaluations })
}

const WINDOW: f64 = 2.0;
const MAX_Y: f64 = 700.0;
const STALL_WINDOWS: usize = 25;

/// `∫_c^∞ f` for `c ≥ 0`.
fn upper_tail<F: Fn(f64) -> f64 + ?Sized>(f: &F, c: f64, tol: Tolerance) -> Result<Estimate> {
    let s = c.max(1.0);
    let g = |y: f64| {
        let t = c + s * y.exp_m1();
        let v = f(t);
        if v == 0.0 {
            0.0
        } else {
            v * s * y.exp()
        }
    };
    let mut sum = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut prev: Option<f64> = None;
    let mut decaying = 0usize;
    let mut stalled = 0usize;
    let mut y = 0.0;
    loop {
        if y >= MAX_Y || !(c + s * (y + WINDOW).exp_m1()).is_finite() {
            return Err(Error::NonIntegrableTail { a: c, b: f64::INFINITY });
        }
        let wtol = Tolerance::new(0.05 * tol.target(sum).max(tol.abs), 0.5 * tol.rel);
        let w = match integrate_finite(&g, y, y + WINDOW, &[], wtol) {
            Ok(e) => e,
            Err(Error::NonFinite { .. }) => {
                return Err(Error::NonIntegrableTail { a: c, b: f64::INFINITY })
            }
            Err(e) => return Err(e),
        };
        evaluations += w.evaluations;
        sum += w.value;
        error += w.error;
        if !sum.is_finite() {
            return Err(Error::NonIntegrableTail { a: c, b: f64::INFINITY });
        }
        let cur = w.value.abs();
        y += WINDOW;
        if let Some(p) = prev {
            if cur == 0.0 && p == 0.0 {
                break;
            }
            let ratio = if p > 0.0 { cur / p } else { f64::INFINITY };
            if ratio < 1.0 {
                decaying += 1;
                stalled = 0;
                let tail = cur * ratio / (1.0 - ratio);
                if decaying >= 2 && tail <= 0.1 * tol.target(sum) {
                    error += tail;
                    break;
                }
            } else {
                decaying = 0;
                stalled += 1;
                if stalled >= STALL_WINDOWS {
                    return Err(Error::NonIntegrableTail { a: c, b: f64::INFINITY });
                }
            }
        }
        prev = Some(cur);
    }
    Ok(Estimate { value: sum, error, evaluations })
}

fn semi_infinite<F: Fn(f64) -> f64 + ?Sized>(f: &F, c: f64, tol: Tolerance) -> Result<Estimate> {
    if c >= 0.0 {
        return upper_tail(f, c, tol);
    }
    let head = integrate_finite(f, c, 0.0, &[], tol)?;
    let tail = upper_tail(f, 0.0, tol)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
        evaluations: head.evaluations + tail.evaluations,
    })
}

/// `∫_a^b f` over any extended-real interval.
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    integrate_with_breaks(f, a, b, &[], tol)
}

pub fn integrate_with_breaks<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument("NaN integration bound".into()));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if a > b {
        let e = integrate_with_breaks(f, b, a, breaks, tol)?;
        return Ok(Estimate { value: -e.value, ..e });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_finite(f, a, b, breaks, tol),
        (true, false) => {
            let split = breaks.iter().copied().filter(|&t| t > a).fold(a, f64::max);
            let head = integrate_finite(f, a, split, breaks, tol)?;
            let tail = semi_infinite(f, split, tol)?;
            Ok(combine(head, tail))
        }
        (false, true) => {
            let mirrored = |t: f64| f(-t);
            let neg: Vec<f64> = breaks.iter().map(|t| -t).collect();
            let dynamic: &dyn Fn(f64) -> f64 = &mirrored;
            integrate_with_breaks(dynamic, -b, f64::INFINITY, &neg, tol)
        }
        (false, false) => {
            let left = integrate_with_breaks(f, f64::NEG_INFINITY, 0.0, breaks, tol)?;
            let right = integrate_with_breaks(f, 0.0, f64::INFINITY, breaks, tol)?;
            Ok(combine(left, right))
        }
    }
}

fn combine(a: Estimate, b: Estimate) -> Estimate {
    Estimate {
        value: a.value + b.value,
        error: a.error + b.error,
        evaluations: a.evaluations + b.evaluations,
    }
}

/// `∫_0^len g`, for integrands concentrated near `0` that may be
/// negligible over most of a long range. `len` may be `+∞`; `breaks` are
/// extra interior breakpoints in the `τ` variable.
pub fn integrate_outward<F: Fn(f64) -> f64 + ?Sized>(
    g: &F,
    len: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    if !(len > 0.0) {
        return Ok(Estimate { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let last_break = breaks.iter().copied().filter(|&b| b > 0.0 && b < len).fold(0.0, f64::max);
    let head_len = if len.is_finite() { len } else { last_break.max(1.0) };
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > 0.0 && b < head_len).collect();
    let mut b = 0.25;
    while b < head_len {
        cuts.push(b);
        b *= 2.0;
    }
    let head = integrate_finite(g, 0.0, head_len, &cuts, tol)?;
    if len.is_finite() {
        return Ok(head);
    }
    Ok(combine(head, upper_tail(g, head_len, tol)?))
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulated antiderivative of a positive function, giving both
/// `∫_{-∞}^x f` and `∫_x^∞ f` with one short quadrature per query.
#[derive(Clone)]
pub struct Cumulative {
    f: ScalarFn,
    nodes: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    left_tail: f64,
    right_tail: f64,
}

impl std::fmt::Debug for Cumulative {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("Cumulative")
            .field("panels", &(self.nodes.len() - 1))
            .field("left_tail", &self.left_tail)
            .field("right_tail", &self.right_tail)
            .finish()
    }
}

const PANEL_TOL: Tolerance = Tolerance::new(0.0, 1e-15);
const TABLE_EDGE: f64 = 1e15;

impl Cumulative {
    /// Builds the table. Tails that do not converge are stored as `+∞`.
    pub fn build(f: ScalarFn, breaks: &[f64]) -> Result<Self> {
        let mut nodes: Vec<f64> = (-16..=16).map(|k| k as f64 / 16.0).collect();
        let mut x = 1.0;
        while x < TABLE_EDGE {
            x = (x * 1.125).min(TABLE_EDGE);
            nodes.push(x);
            nodes.push(-x);
        }
        nodes.extend(breaks.iter().copied().filter(|t| t.abs() < TABLE_EDGE));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let n = nodes.len();
        let mut panels = Vec::with_capacity(n - 1);
        for w in nodes.windows(2) {
            panels.push(integrate_finite(&*f, w[0], w[1], &[], PANEL_TOL)?.value);
        }
        let mut prefix = vec![0.0; n];
        for i in 1..n {
            prefix[i] = prefix[i - 1] + panels[i - 1];
        }
        let mut suffix = vec![0.0; n];
        for i in (0..n - 1).rev() {
            suffix[i] = suffix[i + 1] + panels[i];
        }
        let tail = |a: f64, b: f64| match integrate(&*f, a, b, Tolerance::relative(1e-13)) {
            Ok(e) => Ok(e.value),
            Err(Error::NonIntegrableTail { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        };
        let left_tail = tail(f64::NEG_INFINITY, nodes[0])?;
        let right_tail = tail(nodes[n - 1], f64::INFINITY)?;
        Ok(Cumulative { f, nodes, prefix, suffix, left_tail, right_tail })
    }

    fn piece(&self, a: f64, b: f64) -> f64 {
        match integrate_finite(&*self.f, a, b, &[], PANEL_TOL) {
            Ok(e) => e.value,
            Err(_) => f64::NAN,
        }
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let n = self.nodes.len();
        if !(x >= self.nodes[0] && x <= self.nodes[n - 1]) {
            return None;
        }
        let i = self.nodes.partition_point(|&t| t <= x);
        Some(i.saturating_sub(1).min(n - 2))
    }

    /// `∫_{-∞}^x f`.
    pub fn below(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self.locate(x) {
            Some(i) => self.left_tail + self.prefix[i] + self.piece(self.nodes[i], x),
            None if x < self.nodes[0] => integrate(&*self.f, f64::NEG_INFINITY, x, Tolerance::relative(1e-13))
                .map(|e| e.value)
                .unwrap_or(f64::INFINITY),
            None => {
                let last = *self.nodes.last().expect("table has nodes");
                self.left_tail + self.prefix[self.nodes.len() - 1] + self.piece(last, x)
            }
        }
    }

    /// `∫_x^∞ f`.
    pub fn above(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        match self.locate(x) {
            Some(i) => self.right_tail + self.suffix[i + 1] + self.piece(x, self.nodes[i + 1]),
            None if x > *self.nodes.last().expect("table has nodes") => {
                integrate(&*self.f, x, f64::INFINITY, Tolerance::relative(1e-13))
                    .map(|e| e.value)
                    .unwrap_or(f64::INFINITY)
            }
            None => self.right_tail + self.suffix[0] + self.piece(x, self.nodes[0]),
        }
    }

    pub fn total(&self) -> f64 {
        self.left_tail + self.prefix[self.nodes.len() - 1] + self.right_tail
    }

    pub fn left_integrable(&self) -> bool {
        self.left_tail.is_finite()
    }

    pub fn right_integrable(&self) -> bool {
        self.right_tail.is_finite()
    }
}

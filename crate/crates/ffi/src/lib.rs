//! C interface to `sl_solv`.
//!
//! Objects are opaque handles created by `sl_*` constructors and released
//! by the matching `*_free`. Every fallible call returns an [`SlStatus`] and
//! writes its result through an out-pointer. On failure the message is
//! available from [`sl_last_error_message`] until the next failing call on
//! the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sl_solv::auxiliary::{compute_s, S_TOL};
use sl_solv::green::GreenKernel;
use sl_solv::report::to_sorted_json;
use sl_solv::{analyze, construct_pfss, AnalyzeOptions, CoefficientPair, Error, PfssOptions, PrincipalSystem, SolvabilityReport, Verdict};

/// A coefficient pair `(r, q)`.
pub struct SlPair(CoefficientPair);

/// A principal fundamental system `{u, v}`.
pub struct SlPfss(PrincipalSystem);

/// The outcome of a solvability analysis.
pub struct SlReport(SolvabilityReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    OutsideDomain = 5,
    Utf8 = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlVerdict {
    CorrectlySolvable = 0,
    NotCorrectlySolvable = 1,
    Inconclusive = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SlStatus {
    match e {
        Error::InvalidArgument(_) | Error::InvalidCoefficients(_) => SlStatus::InvalidArgument,
        Error::Parse(_) | Error::Io(_) => SlStatus::Parse,
        Error::OutsideDomain { .. } => SlStatus::OutsideDomain,
        _ => SlStatus::Numerical,
    }
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics to a status.
fn guard<F: FnOnce() -> Result<(), SlStatus>>(f: F) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SlStatus::Panic, "internal panic"),
    }
}

fn check(r: sl_solv::Result<()>) -> Result<(), SlStatus> {
    r.map_err(|e| fail(status_of(&e), format!("{} ({})", e, e.code())))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, SlStatus> {
    p.as_ref().ok_or_else(|| fail(SlStatus::NullPointer, "null handle"))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), SlStatus> {
    if out.is_null() {
        return Err(fail(SlStatus::NullPointer, "null output pointer"));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn new_pair(r: sl_solv::Result<CoefficientPair>, out: *mut *mut SlPair) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(SlStatus::NullPointer, "null output pointer"));
        }
        let mut pair = None;
        check(r.map(|p| pair = Some(p)))?;
        put(out, boxed(SlPair(pair.expect("set on success"))))
    })
}

/// `r = (1 + x²)^alpha`, `q = (1 + x²)^(-beta)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_pair_power_law(alpha: f64, beta: f64, out: *mut *mut SlPair) -> SlStatus {
    new_pair(CoefficientPair::power_law(alpha, beta), out)
}

/// `r ≡ r0`, `q ≡ q0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_pair_constant(r0: f64, q0: f64, out: *mut *mut SlPair) -> SlStatus {
    new_pair(CoefficientPair::constant(r0, q0), out)
}

/// Builds a pair from a JSON problem description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_pair_from_json(json: *const c_char, out: *mut *mut SlPair) -> SlStatus {
    if json.is_null() {
        return fail(SlStatus::NullPointer, "null string");
    }
    match CStr::from_ptr(json).to_str() {
        Ok(text) => new_pair(CoefficientPair::from_json(text), out),
        Err(e) => fail(SlStatus::Utf8, e.to_string()),
    }
}

/// # Safety
/// `pair` must come from an `sl_pair_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sl_pair_free(pair: *mut SlPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Constructs the principal system of `pair`.
///
/// # Safety
/// `pair` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_pfss_construct(pair: *const SlPair, out: *mut *mut SlPfss) -> SlStatus {
    guard(|| {
        let pair = deref(pair)?;
        let mut sys = None;
        check(construct_pfss(&pair.0, &PfssOptions::default()).map(|s| sys = Some(s)))?;
        put(out, boxed(SlPfss(sys.expect("set on success"))))
    })
}

/// Writes `u(x)`, `v(x)` and `ρ(x)`. Any output pointer may be null.
///
/// # Safety
/// `pfss` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_pfss_eval(pfss: *const SlPfss, x: f64, u: *mut f64, v: *mut f64, rho: *mut f64) -> SlStatus {
    guard(|| {
        let sys = &deref(pfss)?.0;
        check(sys.check_domain(x))?;
        for (p, val) in [(u, sys.u(x)), (v, sys.v(x)), (rho, sys.rho(x))] {
            if !p.is_null() {
                p.write(val);
            }
        }
        Ok(())
    })
}

/// The width `s(x)`.
///
/// # Safety
/// `pfss` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_width_s(pfss: *const SlPfss, x: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        let sys = &deref(pfss)?.0;
        let mut s = f64::NAN;
        check(compute_s(sys, x, S_TOL).map(|v| s = v))?;
        put(out, s)
    })
}

/// The Green function `G(x, t)`.
///
/// # Safety
/// `pfss` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_green_eval(pfss: *const SlPfss, x: f64, t: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        let sys = &deref(pfss)?.0;
        check(sys.check_domain(x))?;
        check(sys.check_domain(t))?;
        put(out, GreenKernel::new(sys).eval(x, t))
    })
}

/// # Safety
/// `pfss` must come from [`sl_pfss_construct`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sl_pfss_free(pfss: *mut SlPfss) {
    if !pfss.is_null() {
        drop(Box::from_raw(pfss));
    }
}

/// Decides correct solvability in `L_p`.
///
/// # Safety
/// `pair` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_analyze(pair: *const SlPair, p: f64, out: *mut *mut SlReport) -> SlStatus {
    guard(|| {
        let pair = deref(pair)?;
        let mut rep = None;
        check(analyze(&pair.0, p, &AnalyzeOptions::default()).map(|r| rep = Some(r)))?;
        put(out, boxed(SlReport(rep.expect("set on success"))))
    })
}

/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_report_verdict(report: *const SlReport, out: *mut SlVerdict) -> SlStatus {
    guard(|| {
        let v = match deref(report)?.0.verdict {
            Verdict::CorrectlySolvable => SlVerdict::CorrectlySolvable,
            Verdict::NotCorrectlySolvable => SlVerdict::NotCorrectlySolvable,
            Verdict::Inconclusive => SlVerdict::Inconclusive,
        };
        put(out, v)
    })
}

/// The report as JSON with sorted keys. Release with [`sl_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sl_report_to_json(report: *const SlReport, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        let rep = &deref(report)?.0;
        let mut text = String::new();
        check(to_sorted_json(rep).map(|t| text = t))?;
        let c = CString::new(text).map_err(|e| fail(SlStatus::Utf8, e.to_string()))?;
        put(out, c.into_raw())
    })
}

/// # Safety
/// `report` must come from [`sl_analyze`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sl_report_free(report: *mut SlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The message of the last failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_round_trip() {
        unsafe {
            let mut pair = ptr::null_mut();
            assert_eq!(sl_pair_constant(1.0, 4.0, &mut pair), SlStatus::Ok);
            let mut sys = ptr::null_mut();
            assert_eq!(sl_pfss_construct(pair, &mut sys), SlStatus::Ok);
            let mut rho = 0.0;
            assert_eq!(sl_pfss_eval(sys, 1.0, ptr::null_mut(), ptr::null_mut(), &mut rho), SlStatus::Ok);
            assert!((rho - 0.25).abs() < 1e-14);
            let mut g = 0.0;
            assert_eq!(sl_green_eval(sys, 0.0, 0.0, &mut g), SlStatus::Ok);
            assert!((g - 0.25).abs() < 1e-14);
            let mut s = 0.0;
            assert_eq!(sl_width_s(sys, 0.0, &mut s), SlStatus::Ok);
            assert!((s - 0.125).abs() < 1e-9);
            sl_pfss_free(sys);
            sl_pair_free(pair);
        }
    }

    #[test]
    fn errors_set_the_message() {
        unsafe {
            let mut pair = ptr::null_mut();
            assert_eq!(sl_pair_constant(-1.0, 1.0, &mut pair), SlStatus::InvalidArgument);
            assert!(pair.is_null());
            assert!(!sl_last_error_message().is_null());
            let bad = CString::new("{\"family\":").unwrap();
            assert_eq!(sl_pair_from_json(bad.as_ptr(), &mut pair), SlStatus::Parse);
            assert_eq!(sl_pfss_construct(ptr::null(), ptr::null_mut()), SlStatus::NullPointer);
        }
    }
}

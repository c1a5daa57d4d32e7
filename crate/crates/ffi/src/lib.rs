//! C ABI for `skewgraph`.
//!
//! Systems live behind an opaque `SgSystem` handle created by
//! `sg_system_default` or `sg_system_from_config` and released with
//! `sg_system_free`. Every fallible call returns an `SgStatus`; on failure
//! `sg_last_error_message` describes the error on the calling thread.
//! Panics are caught at the boundary and reported as `SG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use skewgraph::base::{BasePoint, SolenoidPoint};
use skewgraph::config::RunConfig;
use skewgraph::graph::{pullback_fiber_tol, FiberAttractor};
use skewgraph::system::{perturb, validate_system, SkewSystem};
use skewgraph::thermo::{transfer_pressure, Potential};
use skewgraph::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Config = 4,
    Validation = 5,
    Numerical = 6,
    Domain = 7,
    Unsupported = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgPotential {
    Constant = 0,
    Cosine = 1,
    NegLogDeriv = 2,
}

/// Fibre attractor `[lo, hi]` with its extrapolated width.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgFiber {
    pub lo: f64,
    pub hi: f64,
    pub limit_width: f64,
    /// 1 when the fibre is a non-degenerate interval.
    pub is_bone: u8,
}

/// Opaque system handle.
pub struct SgSystem {
    sys: SkewSystem,
    bone_tol: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::Parse { .. } => SgStatus::Parse,
        Error::Config(_) | Error::Ordering { .. } | Error::Order(_) => SgStatus::Config,
        Error::Validation(_) => SgStatus::Validation,
        Error::Numerical(_) | Error::LeftBand { .. } => SgStatus::Numerical,
        Error::Domain { .. } => SgStatus::Domain,
        Error::UnsupportedVariant { .. } | Error::InsufficientDepth { .. } => SgStatus::Unsupported,
        Error::Io(_) | Error::Csv(_) => SgStatus::Io,
    }
}

fn fail(status: SgStatus, msg: &str) -> SgStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), SgStatus>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SgStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SgStatus::Panic, &msg)
        }
    }
}

fn lib<T>(r: skewgraph::Result<T>) -> Result<T, SgStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

fn handle<'a>(sys: *const SgSystem) -> Result<&'a SgSystem, SgStatus> {
    // SAFETY: the caller passes a handle from `sg_system_*` that has not been freed.
    unsafe { sys.as_ref() }.ok_or_else(|| fail(SgStatus::NullPointer, "null system handle"))
}

fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, SgStatus> {
    // SAFETY: the caller provides a valid, writable pointer or null.
    unsafe { p.as_mut() }.ok_or_else(|| fail(SgStatus::NullPointer, "null output pointer"))
}

fn new_handle(out: *mut *mut SgSystem, sys: SkewSystem, bone_tol: f64) -> Result<(), SgStatus> {
    let slot = out_ptr(out)?;
    *slot = Box::into_raw(Box::new(SgSystem { sys, bone_tol }));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The reference two-band system.
#[no_mangle]
pub extern "C" fn sg_system_default(out: *mut *mut SgSystem) -> SgStatus {
    guard(|| new_handle(out, SkewSystem::reference(), skewgraph::graph::DEFAULT_BONE_TOL))
}

/// A system from the text of a TOML run configuration.
///
/// # Safety
/// `config` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sg_system_from_config(config: *const c_char, out: *mut *mut SgSystem) -> SgStatus {
    guard(|| {
        if config.is_null() {
            return Err(fail(SgStatus::NullPointer, "null config string"));
        }
        // SAFETY: non-null and NUL-terminated by contract.
        let text = unsafe { CStr::from_ptr(config) }
            .to_str()
            .map_err(|_| fail(SgStatus::InvalidArgument, "config is not UTF-8"))?;
        let cfg = lib(RunConfig::parse(text))?;
        let sys = lib(cfg.system())?;
        new_handle(out, sys, cfg.budgets.bone_tol)
    })
}

/// Copy of `sys` with band-0 `f₀` perturbed by `eta`.
#[no_mangle]
pub extern "C" fn sg_system_perturb(sys: *const SgSystem, eta: f64, out: *mut *mut SgSystem) -> SgStatus {
    guard(|| {
        let h = handle(sys)?;
        let p = lib(perturb(&h.sys, eta))?;
        new_handle(out, p, h.bone_tol)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `sys` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_system_free(sys: *mut SgSystem) {
    if !sys.is_null() {
        // SAFETY: created by `Box::into_raw` in `new_handle`.
        drop(unsafe { Box::from_raw(sys) });
    }
}

#[no_mangle]
pub extern "C" fn sg_system_band_count(sys: *const SgSystem, out: *mut usize) -> SgStatus {
    guard(|| {
        let h = handle(sys)?;
        *out_ptr(out)? = h.sys.bands.len();
        Ok(())
    })
}

/// Runs the structural checks; `passed` receives 1 when every required
/// check holds.
#[no_mangle]
pub extern "C" fn sg_system_validate(sys: *const SgSystem, passed: *mut u8) -> SgStatus {
    guard(|| {
        let h = handle(sys)?;
        let slot = out_ptr(passed)?;
        let r = validate_system(&h.sys);
        *slot = r.passed() as u8;
        Ok(())
    })
}

/// `f_t(x)` (order 0) or its first or second `x`-derivative on `band`.
#[no_mangle]
pub extern "C" fn sg_fiber_eval(sys: *const SgSystem, band: usize, t: f64, x: f64, order: u8, out: *mut f64) -> SgStatus {
    guard(|| {
        let h = handle(sys)?;
        let slot = out_ptr(out)?;
        lib(h.sys.band(band))?;
        *slot = lib(h.sys.fiber_eval(band, t, x, order))?;
        Ok(())
    })
}

fn write_fiber(out: *mut SgFiber, a: &FiberAttractor) -> Result<(), SgStatus> {
    *out_ptr(out)? = SgFiber {
        lo: a.lo,
        hi: a.hi,
        limit_width: a.limit_width,
        is_bone: a.is_bone as u8,
    };
    Ok(())
}

/// Attractor of `band` over the baker point `(t, s)` from a depth-`depth`
/// pullback. A double carries about 26 base-4 digits of past, so deeper
/// pullbacks see a tail of zero digits; use `sg_pullback_fiber_digits` for
/// random points at depth beyond that.
#[no_mangle]
pub extern "C" fn sg_pullback_fiber(
    sys: *const SgSystem,
    band: usize,
    t: f64,
    s: f64,
    depth: usize,
    out: *mut SgFiber,
) -> SgStatus {
    guard(|| {
        let h = handle(sys)?;
        if !((0.0..1.0).contains(&t) && (0.0..1.0).contains(&s)) {
            return Err(fail(SgStatus::Domain, "baker coordinates must lie in [0, 1)"));
        }
        let a = lib(pullback_fiber_tol(&h.sys, band, &BasePoint::baker(t, s), depth, h.bone_tol))?;
        write_fiber(out, &a)
    })
}

/// As `sg_pullback_fiber` over a digit-coded base point: `past[k]` is the
/// digit `d_{k+1}` of the pre-orbit, `future` the base-4 digits of `t₀`.
///
/// # Safety
/// `past` and `future` must point to `n_past` and `n_future` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn sg_pullback_fiber_digits(
    sys: *const SgSystem,
    band: usize,
    past: *const u8,
    n_past: usize,
    future: *const u8,
    n_future: usize,
    depth: usize,
    out: *mut SgFiber,
) -> SgStatus {
    guard(|| {
        let h = handle(sys)?;
        if (past.is_null() && n_past > 0) || (future.is_null() && n_future > 0) {
            return Err(fail(SgStatus::NullPointer, "null digit array"));
        }
        let view = |p: *const u8, n: usize| {
            if n == 0 {
                &[][..]
            } else {
                // SAFETY: non-null with `n` readable bytes by contract.
                unsafe { std::slice::from_raw_parts(p, n) }
            }
        };
        let point = lib(SolenoidPoint::new(view(past, n_past), view(future, n_future)))?;
        let a = lib(pullback_fiber_tol(&h.sys, band, &BasePoint::Solenoid(point), depth, h.bone_tol))?;
        write_fiber(out, &a)
    })
}

/// Transfer-operator pressure of a base potential at one resolution.
/// `param` is the constant or the cosine amplitude and is ignored for
/// `SG_POTENTIAL_NEG_LOG_DERIV`.
#[no_mangle]
pub extern "C" fn sg_transfer_pressure(kind: SgPotential, param: f64, resolution: usize, out: *mut f64) -> SgStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let phi = match kind {
            SgPotential::Constant => Potential::Constant(param),
            SgPotential::Cosine => Potential::Cosine(param),
            SgPotential::NegLogDeriv => Potential::NegLogDeriv,
        };
        if !param.is_finite() {
            return Err(fail(SgStatus::InvalidArgument, "potential parameter must be finite"));
        }
        *slot = lib(transfer_pressure(&phi, &[resolution]))?.pressure.value;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_error_maps_to_a_status() {
        assert_eq!(status_of(&Error::Validation("x".into())), SgStatus::Validation);
        assert_eq!(status_of(&Error::Domain { x: 2.0, lo: 0.0, hi: 1.0 }), SgStatus::Domain);
    }

    #[test]
    fn panics_become_status_codes() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, SgStatus::Panic);
        let msg = unsafe { CStr::from_ptr(sg_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "boom");
    }
}

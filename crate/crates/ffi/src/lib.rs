//! C ABI over `dsem`.
//!
//! Objects are opaque handles created by `*_from_json` or `dsem_synthesize` and released
//! with the matching `*_free`. Every fallible call returns a `DsemStatus`; on failure
//! `dsem_last_error` describes it. Strings returned through `char **` are owned by the
//! caller and released with `dsem_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dsem::gplp::{check_commuting_square, GeneralizedPlp};
use dsem::measures::format_rational;
use dsem::relational::World;
use dsem::sip::{sip_prob, SipParams};
use dsem::synth::{synthesize, verify_global, verify_synthesis, VerifyMode};
use dsem::{Budget, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Budget = 3,
    NotRepresentable = 4,
    Internal = 5,
}

/// SIP parameters.
pub struct DsemParams {
    inner: SipParams,
}

/// A generalised PLP bundle.
pub struct DsemPlp {
    inner: GeneralizedPlp,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> DsemStatus {
    match e {
        Error::Budget { .. } => DsemStatus::Budget,
        Error::NotRepresentable(_) => DsemStatus::NotRepresentable,
        _ => DsemStatus::InvalidInput,
    }
}

/// Runs `f`, turning errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), DsemStatus>) -> DsemStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsemStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            DsemStatus::Internal
        }
    }
}

fn lib<T>(r: dsem::Result<T>) -> Result<T, DsemStatus> {
    r.map_err(|e| {
        set_error(&e.to_string());
        status_of(&e)
    })
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, DsemStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(DsemStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        DsemStatus::InvalidInput
    })
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, DsemStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        DsemStatus::NullPointer
    })
}

unsafe fn store<T>(out: *mut T, v: T) -> Result<(), DsemStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(DsemStatus::NullPointer);
    }
    out.write(v);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message for the last failed call on this thread; empty after a success. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn dsem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn dsem_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsem_params_from_json(json: *const c_char, out: *mut *mut DsemParams) -> DsemStatus {
    guard(|| {
        let p = lib(SipParams::from_json(text(json)?))?;
        store(out, Box::into_raw(Box::new(DsemParams { inner: p })))
    })
}

/// # Safety
/// `p` must come from `dsem_params_from_json`, or be null.
#[no_mangle]
pub unsafe extern "C" fn dsem_params_free(p: *mut DsemParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Probability of `world` (e.g. `"P(0) E(0,1)"`) at domain size `n`, as `"p/q"`.
///
/// # Safety
/// Pointers must be valid; `out` receives a string to release with `dsem_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dsem_sip_prob(
    params: *const DsemParams,
    world: *const c_char,
    n: usize,
    out: *mut *mut c_char,
) -> DsemStatus {
    guard(|| {
        let p = &borrow(params)?.inner;
        let w = lib(World::parse(text(world)?, p.signature().clone(), n))?;
        let q = lib(sip_prob(p, &w))?;
        store(out, owned_string(format_rational(&q)))
    })
}

/// Compiles parameters into a PLP. Essentially asymmetric parameters give
/// `DSEM_STATUS_NOT_REPRESENTABLE` with the witness in `dsem_last_error`.
///
/// # Safety
/// `params` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsem_synthesize(params: *const DsemParams, out: *mut *mut DsemPlp) -> DsemStatus {
    guard(|| {
        let plan = lib(synthesize(&borrow(params)?.inner))?;
        store(out, Box::into_raw(Box::new(DsemPlp { inner: plan.plp })))
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsem_plp_from_json(json: *const c_char, out: *mut *mut DsemPlp) -> DsemStatus {
    guard(|| {
        let p = lib(GeneralizedPlp::from_json(text(json)?))?;
        store(out, Box::into_raw(Box::new(DsemPlp { inner: p })))
    })
}

/// # Safety
/// `plp` must be a live handle; `out` receives a string to release with `dsem_string_free`.
#[no_mangle]
pub unsafe extern "C" fn dsem_plp_to_json(plp: *const DsemPlp, out: *mut *mut c_char) -> DsemStatus {
    guard(|| store(out, owned_string(borrow(plp)?.inner.to_json())))
}

/// # Safety
/// `p` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn dsem_plp_free(p: *mut DsemPlp) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sets `*passed` to 1 when the rule expansion commutes with restrictions up to `max_n`
/// and the reduct family is projective, else 0.
///
/// # Safety
/// `plp` must be a live handle; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsem_check_square(
    plp: *const DsemPlp,
    max_n: usize,
    budget_atoms: u32,
    passed: *mut c_int,
) -> DsemStatus {
    guard(|| {
        let r = lib(check_commuting_square(&borrow(plp)?.inner, max_n, Budget::new(budget_atoms)))?;
        if !r.passed() {
            set_error(&r.to_string());
        }
        store(passed, r.passed() as c_int)
    })
}

/// Compares the PLP's marginal at size `n` with the parameters' distribution.
///
/// # Safety
/// Handles must be live; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsem_verify_global(
    plp: *const DsemPlp,
    params: *const DsemParams,
    n: usize,
    budget_atoms: u32,
    passed: *mut c_int,
) -> DsemStatus {
    guard(|| {
        let r = lib(verify_global(&borrow(plp)?.inner, &borrow(params)?.inner, n, Budget::new(budget_atoms)))?;
        if !r.passed() {
            set_error(&r.to_string());
        }
        store(passed, r.passed() as c_int)
    })
}

/// Synthesizes from `params` and runs the stage-by-stage verification.
///
/// # Safety
/// `params` must be a live handle; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsem_verify_local(params: *const DsemParams, passed: *mut c_int) -> DsemStatus {
    guard(|| {
        let p = &borrow(params)?.inner;
        let plan = lib(synthesize(p))?;
        let r = lib(verify_synthesis(&plan, p, VerifyMode::Local))?;
        if !r.passed() {
            set_error(&r.to_string());
        }
        store(passed, r.passed() as c_int)
    })
}

/// Default enumeration budget, in ground atoms.
#[no_mangle]
pub extern "C" fn dsem_default_budget() -> u32 {
    Budget::DEFAULT_ATOMS
}

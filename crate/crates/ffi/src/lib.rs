//! C ABI over `atomless`.
//!
//! Models and policies are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`AtomlessStatus`]; on failure the
//! message is available from [`atomless_last_error`] on the same thread.
//! Strings returned by the library are released with [`atomless_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use atomless::derandomize::{derandomize, mix_pair};
use atomless::model::{builtin, AtomlessMdp, BuiltinModel, BuiltinParams};
use atomless::occupancy::performance;
use atomless::policy::AnyPolicy;
use atomless::Error;

/// Status codes. The nonzero library codes match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomlessStatus {
    Ok = 0,
    /// Invalid model, policy, schema or argument domain.
    Validation = 2,
    /// Not certified, tolerance not reached, infeasible or undecidable target.
    CertifiedFailure = 3,
    Io = 4,
    NullPointer = 5,
    /// Bad UTF-8, short output buffer or wrong policy kind.
    InvalidArgument = 6,
    Panic = 7,
}

/// Opaque model handle.
pub struct AtomlessModel(AtomlessMdp);

/// Opaque policy handle, deterministic or stationary.
pub struct AtomlessPolicy(AnyPolicy);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(AtomlessStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match atomless::cli::exit_code(&e) {
            3 => AtomlessStatus::CertifiedFailure,
            4 => AtomlessStatus::Io,
            _ => AtomlessStatus::Validation,
        };
        Fail(code, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AtomlessStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> AtomlessStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AtomlessStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside atomless".to_string());
            AtomlessStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AtomlessStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn model<'a>(m: *const AtomlessModel) -> Result<&'a AtomlessMdp, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn policy<'a>(p: *const AtomlessPolicy) -> Result<&'a AnyPolicy, Fail> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("policy"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn atomless_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a TOML model document.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_from_toml(toml: *const c_char, out: *mut *mut AtomlessModel) -> AtomlessStatus {
    guard(|| {
        let m = AtomlessMdp::from_toml(text(toml, "toml")?)?;
        put(out, AtomlessModel(m))
    })
}

/// Reads a TOML model document from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_load(path: *const c_char, out: *mut *mut AtomlessModel) -> AtomlessStatus {
    guard(|| {
        let path = text(path, "path")?;
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        put(out, AtomlessModel(AtomlessMdp::from_toml(&body)?))
    })
}

/// Builds a named builtin model. `cells` sizes grid-based builtins, `seed`
/// drives `random`, `beta` is the discount of `one-cell-discounted`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_builtin(
    name: *const c_char,
    cells: usize,
    seed: u64,
    beta: f64,
    out: *mut *mut AtomlessModel,
) -> AtomlessStatus {
    guard(|| {
        let name = text(name, "name")?;
        let params = BuiltinParams { grid: cells, seed, beta, ..BuiltinParams::default() };
        match builtin(name, &params)? {
            BuiltinModel::Atomless(m) => put(out, AtomlessModel(m)),
            BuiltinModel::Finite(_) => {
                Err(Fail(AtomlessStatus::InvalidArgument, format!("builtin `{name}` is not an atomless model")))
            }
        }
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_free(m: *mut AtomlessModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of reward criteria; 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_criteria(m: *const AtomlessModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.criteria())
}

/// Number of actions; 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_actions(m: *const AtomlessModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.action_count())
}

/// Certified bound `L` on the expected absorption time.
///
/// # Safety
/// `m` must be a live model handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_model_certificate(m: *const AtomlessModel, out: *mut f64) -> AtomlessStatus {
    guard(|| {
        let l = model(m)?.certificate()?.l();
        *out.as_mut().ok_or_else(|| null("output pointer"))? = l;
        Ok(())
    })
}

/// Parses a policy in the row format (`lo hi action` or `lo hi p_0 .. p_k`)
/// and checks it against the model.
///
/// # Safety
/// `m` must be a live model handle, `rows` a NUL-terminated string and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_policy_parse(
    m: *const AtomlessModel,
    rows: *const c_char,
    out: *mut *mut AtomlessPolicy,
) -> AtomlessStatus {
    guard(|| {
        let m = model(m)?;
        let p = AnyPolicy::parse(text(rows, "rows")?, m.action_count())?;
        match &p {
            AnyPolicy::Deterministic(phi) => m.check_deterministic(phi)?,
            AnyPolicy::Stationary(pi) => m.check_stationary(pi)?,
        }
        put(out, AtomlessPolicy(p))
    })
}

/// # Safety
/// `p` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn atomless_policy_free(p: *mut AtomlessPolicy) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// 1 for a deterministic policy, 0 for a stationary one or null.
///
/// # Safety
/// `p` must be null or a live policy handle.
#[no_mangle]
pub unsafe extern "C" fn atomless_policy_is_deterministic(p: *const AtomlessPolicy) -> i32 {
    matches!(p.as_ref(), Some(AtomlessPolicy(AnyPolicy::Deterministic(_)))) as i32
}

/// Row-format text of a policy; release with [`atomless_string_free`].
/// Returns null for a null handle.
///
/// # Safety
/// `p` must be null or a live policy handle.
#[no_mangle]
pub unsafe extern "C" fn atomless_policy_to_string(p: *const AtomlessPolicy) -> *mut c_char {
    let Some(p) = p.as_ref() else { return ptr::null_mut() };
    let s = match &p.0 {
        AnyPolicy::Deterministic(phi) => phi.to_text(),
        AnyPolicy::Stationary(pi) => pi.to_text(),
    };
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `s` must come from [`atomless_policy_to_string`]; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn atomless_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Writes the performance vector of `p` to `out[0..criteria]`.
///
/// # Safety
/// `m` and `p` must be live handles and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn atomless_evaluate(
    m: *const AtomlessModel,
    p: *const AtomlessPolicy,
    tol: f64,
    out: *mut f64,
    len: usize,
) -> AtomlessStatus {
    guard(|| {
        let m = model(m)?;
        let pi = policy(p)?.clone().into_stationary(m.action_count());
        let v = performance(m, &pi, tol)?;
        write_vector(&v, out, len)
    })
}

unsafe fn write_vector(v: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < v.len() {
        return Err(Fail(AtomlessStatus::InvalidArgument, format!("buffer holds {len} values, need {}", v.len())));
    }
    std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(v);
    Ok(())
}

/// Deterministic policy whose performance is within `tol` of that of `p`.
///
/// # Safety
/// `m` and `p` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_derandomize(
    m: *const AtomlessModel,
    p: *const AtomlessPolicy,
    tol: f64,
    out: *mut *mut AtomlessPolicy,
) -> AtomlessStatus {
    guard(|| {
        let m = model(m)?;
        let pi = policy(p)?.clone().into_stationary(m.action_count());
        let (phi, _) = derandomize(m, &pi, tol)?;
        put(out, AtomlessPolicy(AnyPolicy::Deterministic(phi)))
    })
}

/// Deterministic policy realizing `lambda v(p0) + (1 - lambda) v(p1)` within
/// `tol`. Both inputs must be deterministic.
///
/// # Safety
/// `m`, `p0` and `p1` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn atomless_mix(
    m: *const AtomlessModel,
    p0: *const AtomlessPolicy,
    p1: *const AtomlessPolicy,
    lambda: f64,
    tol: f64,
    out: *mut *mut AtomlessPolicy,
) -> AtomlessStatus {
    guard(|| {
        let m = model(m)?;
        let det = |p: *const AtomlessPolicy| match policy(p)? {
            AnyPolicy::Deterministic(phi) => Ok(phi.clone()),
            AnyPolicy::Stationary(_) => {
                Err(Fail(AtomlessStatus::InvalidArgument, "mix needs deterministic policies".to_string()))
            }
        };
        let (phi, _) = mix_pair(m, &det(p0)?, &det(p1)?, lambda, tol)?;
        put(out, AtomlessPolicy(AnyPolicy::Deterministic(phi)))
    })
}

//! C ABI over `slotqed`.
//!
//! Every call returns a [`SlotqedStatus`]. On failure the message is kept in
//! a thread-local buffer readable with [`slotqed_last_error`] until the next
//! failing call on the same thread. Handles are opaque and must be released
//! with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::OnceLock;

use slotqed::scenario::{Scenario, ScenarioFile, SweepPoint};
use slotqed::{verify, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotqedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Numerical = 5,
    Io = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A parsed and validated scenario.
pub struct SlotqedScenario {
    inner: Scenario,
}

/// Sweep results of one run.
pub struct SlotqedResult {
    points: Vec<SweepPoint>,
    gamma0: f64,
}

/// One sweep point. Shifts, centres and widths are in units of Γ0; fields
/// that do not apply to the sweep are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotqedPoint {
    pub x: f64,
    pub n_atoms: usize,
    pub shift: f64,
    pub shift_err: f64,
    pub center: f64,
    pub width: f64,
    pub converged: bool,
    pub failed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> SlotqedStatus {
    match e {
        Error::Config { .. } | Error::Parse { .. } => SlotqedStatus::Config,
        Error::Domain(_) => SlotqedStatus::Domain,
        Error::Io(_) | Error::Csv(_) => SlotqedStatus::Io,
        _ => SlotqedStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SlotqedStatus>) -> SlotqedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlotqedStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SlotqedStatus::Panic
        }
    }
}

fn lift<T>(r: slotqed::Result<T>) -> Result<T, SlotqedStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> SlotqedStatus {
    set_error(format!("{what} is null"));
    SlotqedStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SlotqedStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SlotqedStatus::InvalidUtf8
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SlotqedStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slotqed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slotqed_version() -> *const c_char {
    static V: OnceLock<CString> = OnceLock::new();
    V.get_or_init(|| CString::new(slotqed::version_string()).unwrap())
        .as_ptr()
}

/// Parse a scenario from TOML text. `base_dir` (nullable) resolves relative
/// mode-file paths.
///
/// # Safety
/// `toml` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn slotqed_scenario_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut SlotqedScenario,
) -> SlotqedStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(toml, "toml")?;
        let base = if base_dir.is_null() {
            None
        } else {
            Some(str_arg(base_dir, "base_dir")?)
        };
        let file = lift(ScenarioFile::from_toml(text))?;
        let inner = lift(file.resolve(base.map(Path::new)))?;
        *out = Box::into_raw(Box::new(SlotqedScenario { inner }));
        Ok(())
    })
}

/// Load a scenario file; relative paths inside resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slotqed_scenario_load(path: *const c_char, out: *mut *mut SlotqedScenario) -> SlotqedStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = Path::new(str_arg(path, "path")?);
        let file = lift(ScenarioFile::load(path))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        let inner = lift(file.resolve(base))?;
        *out = Box::into_raw(Box::new(SlotqedScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from a scenario constructor and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn slotqed_scenario_free(s: *mut SlotqedScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Copy the hex config hash into `buf` (`cap` bytes including the NUL).
///
/// # Safety
/// `s` must be a live handle and `buf` writable for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn slotqed_scenario_hash(
    s: *const SlotqedScenario,
    buf: *mut c_char,
    cap: usize,
) -> SlotqedStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let h = s.inner.hash.as_bytes();
        if cap < h.len() + 1 {
            set_error(format!("hash needs {} bytes", h.len() + 1));
            return Err(SlotqedStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(h.as_ptr(), buf.cast::<u8>(), h.len());
        *buf.add(h.len()) = 0;
        Ok(())
    })
}

/// Run every sweep point in memory.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slotqed_scenario_run(
    s: *const SlotqedScenario,
    out: *mut *mut SlotqedResult,
) -> SlotqedStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        let points = lift(s.inner.run())?;
        *out = Box::into_raw(Box::new(SlotqedResult {
            points,
            gamma0: s.inner.sim.params.gamma0,
        }));
        Ok(())
    })
}

/// Run and write the output tables into `dir`.
///
/// # Safety
/// `s` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn slotqed_scenario_run_to_dir(s: *const SlotqedScenario, dir: *const c_char) -> SlotqedStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        let dir = str_arg(dir, "dir")?;
        lift(s.inner.run_to_dir(Path::new(dir)))?;
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`slotqed_scenario_run`] and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn slotqed_result_free(r: *mut SlotqedResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of sweep points; 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn slotqed_result_len(r: *const SlotqedResult) -> usize {
    r.as_ref().map_or(0, |r| r.points.len())
}

unsafe fn point_at<'a>(
    r: *const SlotqedResult,
    i: usize,
) -> Result<(&'a SlotqedResult, &'a SweepPoint), SlotqedStatus> {
    let r = r.as_ref().ok_or_else(|| null("result"))?;
    match r.points.get(i) {
        Some(p) => Ok((r, p)),
        None => {
            set_error(format!("point {i} out of range (len {})", r.points.len()));
            Err(SlotqedStatus::OutOfRange)
        }
    }
}

/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slotqed_result_point(
    r: *const SlotqedResult,
    i: usize,
    out: *mut SlotqedPoint,
) -> SlotqedStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (r, p) = point_at(r, i)?;
        let g0 = r.gamma0;
        let mut pt = SlotqedPoint {
            x: p.x,
            n_atoms: p.n_atoms,
            shift: f64::NAN,
            shift_err: f64::NAN,
            center: f64::NAN,
            width: f64::NAN,
            converged: false,
            failed: p.error.is_some(),
        };
        if let Some(s) = &p.shift {
            pt.shift = s.shift / g0;
            pt.shift_err = s.shift_err / g0;
            pt.center = s.interacting.center / g0;
            pt.width = s.interacting.width / g0;
            pt.converged = s.ok;
        } else if let Some(f) = &p.fit {
            pt.center = f.center / g0;
            pt.width = f.width / g0;
            pt.converged = f.converged;
        }
        *out = pt;
        Ok(())
    })
}

/// Length of spectrum `variant` (0 interacting, 1 reference) at point `i`.
///
/// # Safety
/// `r` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn slotqed_result_spectrum_len(
    r: *const SlotqedResult,
    i: usize,
    variant: usize,
    len: *mut usize,
) -> SlotqedStatus {
    guard(|| {
        let len = out_arg(len, "len")?;
        let (_, p) = point_at(r, i)?;
        let s = p.spectra.get(variant).ok_or_else(|| {
            set_error(format!("variant {variant} out of range"));
            SlotqedStatus::OutOfRange
        })?;
        *len = s.len();
        Ok(())
    })
}

/// Copy a spectrum: detunings (in Γ0), absorption and its standard error.
/// Each buffer must hold `cap` values; any of them may be null to skip it.
///
/// # Safety
/// `r` must be a live handle; non-null buffers must be writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn slotqed_result_spectrum(
    r: *const SlotqedResult,
    i: usize,
    variant: usize,
    detuning: *mut f64,
    absorption: *mut f64,
    std_err: *mut f64,
    cap: usize,
) -> SlotqedStatus {
    guard(|| {
        let (r, p) = point_at(r, i)?;
        let s = p.spectra.get(variant).ok_or_else(|| {
            set_error(format!("variant {variant} out of range"));
            SlotqedStatus::OutOfRange
        })?;
        if cap < s.len() {
            set_error(format!("spectrum needs {} values", s.len()));
            return Err(SlotqedStatus::BufferTooSmall);
        }
        let g0 = r.gamma0;
        for (k, d) in s.detunings.iter().enumerate() {
            if !detuning.is_null() {
                *detuning.add(k) = d / g0;
            }
            if !absorption.is_null() {
                *absorption.add(k) = s.absorption[k];
            }
            if !std_err.is_null() {
                *std_err.add(k) = s.std_err.get(k).copied().unwrap_or(0.0);
            }
        }
        Ok(())
    })
}

/// Run the oracle checks. `passed` and `total` (both nullable) receive counts;
/// the status is `Ok` even if some checks fail.
///
/// # Safety
/// Non-null pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn slotqed_verify(passed: *mut usize, total: *mut usize) -> SlotqedStatus {
    guard(|| {
        let checks = verify::run_checks();
        if let Some(p) = passed.as_mut() {
            *p = checks.iter().filter(|c| c.pass).count();
        }
        if let Some(t) = total.as_mut() {
            *t = checks.len();
        }
        Ok(())
    })
}

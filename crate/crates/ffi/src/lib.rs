//! C ABI over `beamlab-core`.
//!
//! Systems are opaque handles created by [`beamlab_system_new`] and released
//! with [`beamlab_system_free`]. Every fallible call returns a
//! [`BeamlabStatus`]; on failure [`beamlab_last_error_message`] describes the
//! most recent error on the calling thread. State vectors are laid out as
//! positions followed by velocities, `2 * n_q` doubles in total.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use beamlab_core::cli::RunConfig;
use beamlab_core::discretization::{SemiDiscreteSystem, StateVector};
use beamlab_core::model::classify;
use beamlab_core::spectral::{full_spectrum, ResolventEvaluator};
use beamlab_core::Error;

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamlabStatus {
    Ok = 0,
    /// Null pointer, wrong length or malformed UTF-8.
    InvalidArgument = 1,
    /// Configuration rejected by validation.
    Config = 2,
    /// Solver failure or resolvent pole.
    Numerical = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// Opaque discretized beam.
pub struct BeamlabSystem {
    sys: SemiDiscreteSystem,
    resolvent: Option<ResolventEvaluator>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: BeamlabStatus, msg: impl Into<String>) -> BeamlabStatus {
    set_error(msg);
    status
}

fn from_core(err: Error) -> BeamlabStatus {
    let status = match err {
        Error::Validation { .. } | Error::Config(_) | Error::Precondition(_) | Error::TooLarge { .. } => BeamlabStatus::Config,
        Error::Dimension { .. } => BeamlabStatus::InvalidArgument,
        _ => BeamlabStatus::Numerical,
    };
    fail(status, err.to_string())
}

/// Runs `f`, turning panics into [`BeamlabStatus::Panic`].
fn guard(f: impl FnOnce() -> BeamlabStatus) -> BeamlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == BeamlabStatus::Ok {
                set_error("");
            }
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(BeamlabStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// Null means defaults; otherwise a NUL-terminated UTF-8 JSON document.
unsafe fn read_config(json: *const c_char) -> Result<RunConfig, BeamlabStatus> {
    if json.is_null() {
        return Ok(RunConfig::default());
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|_| fail(BeamlabStatus::InvalidArgument, "config is not valid UTF-8"))?;
    RunConfig::from_json_str(text).map_err(from_core)
}

unsafe fn state_arg(sys: &SemiDiscreteSystem, state: *const f64, len: usize) -> Result<StateVector, BeamlabStatus> {
    if state.is_null() {
        return Err(fail(BeamlabStatus::InvalidArgument, "state pointer is null"));
    }
    if len != sys.state_dim() {
        return Err(fail(
            BeamlabStatus::InvalidArgument,
            format!("state length {len} does not match state dimension {}", sys.state_dim()),
        ));
    }
    Ok(StateVector::from_vec(std::slice::from_raw_parts(state, len)))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(BeamlabStatus::InvalidArgument, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Builds the discretization described by a run-config JSON document
/// (`NULL` selects the desk defaults) and stores a new handle in `*out`.
///
/// # Safety
/// `config_json` is `NULL` or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn beamlab_system_new(config_json: *const c_char, out: *mut *mut BeamlabSystem) -> BeamlabStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let cfg = try_status!(read_config(config_json));
        let beam = try_status!(cfg.beam_config().map_err(from_core));
        let sys = try_status!(SemiDiscreteSystem::new(&beam, &cfg.damping, cfg.mesh.n_elements).map_err(from_core));
        *out = Box::into_raw(Box::new(BeamlabSystem { sys, resolvent: None }));
        BeamlabStatus::Ok
    })
}

/// Releases a handle. `NULL` is ignored.
///
/// # Safety
/// `sys` is `NULL` or a handle from [`beamlab_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn beamlab_system_free(sys: *mut BeamlabSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Length of a state vector, `2 * n_q`.
///
/// # Safety
/// `sys` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn beamlab_system_state_dim(sys: *const BeamlabSystem, out: *mut usize) -> BeamlabStatus {
    guard(|| {
        non_null!(sys, out);
        *out = (*sys).sys.state_dim();
        BeamlabStatus::Ok
    })
}

/// Discrete energy `E(U)`.
///
/// # Safety
/// `sys` is a live handle; `state` points to `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn beamlab_energy(sys: *const BeamlabSystem, state: *const f64, len: usize, out: *mut f64) -> BeamlabStatus {
    guard(|| {
        non_null!(sys, out);
        let s = &(*sys).sys;
        let u = try_status!(state_arg(s, state, len));
        *out = try_status!(s.energy(&u).map_err(from_core));
        BeamlabStatus::Ok
    })
}

/// Instantaneous energy loss rate `p^T D p`.
///
/// # Safety
/// As for [`beamlab_energy`].
#[no_mangle]
pub unsafe extern "C" fn beamlab_dissipation_rate(
    sys: *const BeamlabSystem,
    state: *const f64,
    len: usize,
    out: *mut f64,
) -> BeamlabStatus {
    guard(|| {
        non_null!(sys, out);
        let s = &(*sys).sys;
        let u = try_status!(state_arg(s, state, len));
        *out = try_status!(s.dissipation_rate(&u).map_err(from_core));
        BeamlabStatus::Ok
    })
}

/// Writes `A_h U` into `out` (`len` doubles).
///
/// # Safety
/// `sys` is a live handle; `state` and `out` each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn beamlab_apply_generator(
    sys: *const BeamlabSystem,
    state: *const f64,
    len: usize,
    out: *mut f64,
) -> BeamlabStatus {
    guard(|| {
        non_null!(sys, out);
        let s = &(*sys).sys;
        let u = try_status!(state_arg(s, state, len));
        let v = try_status!(s.apply_generator(&u).map_err(from_core)).to_vec();
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&v);
        BeamlabStatus::Ok
    })
}

/// Energy-norm resolvent `|(i lambda - A_h)^{-1}|`. A numerically singular
/// shift yields [`BeamlabStatus::Numerical`].
///
/// # Safety
/// `sys` is a live handle not used concurrently; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn beamlab_resolvent_norm(sys: *mut BeamlabSystem, lambda: f64, out: *mut f64) -> BeamlabStatus {
    guard(|| {
        non_null!(sys, out);
        let h = &mut *sys;
        if h.resolvent.is_none() {
            h.resolvent = Some(try_status!(ResolventEvaluator::new(&h.sys).map_err(from_core)));
        }
        let ev = h.resolvent.as_ref().expect("initialized above");
        *out = try_status!(ev.norm_at(lambda).map_err(from_core)).norm;
        BeamlabStatus::Ok
    })
}

/// Largest real part over the discrete spectrum.
///
/// # Safety
/// `sys` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn beamlab_spectral_abscissa(sys: *const BeamlabSystem, out: *mut f64) -> BeamlabStatus {
    guard(|| {
        non_null!(sys, out);
        *out = try_status!(full_spectrum(&(*sys).sys).map_err(from_core)).spectral_abscissa;
        BeamlabStatus::Ok
    })
}

/// Stability verdict for a run config as a JSON string in `*out`, to be
/// released with [`beamlab_string_free`].
///
/// # Safety
/// `config_json` is `NULL` or a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn beamlab_classify_json(config_json: *const c_char, out: *mut *mut c_char) -> BeamlabStatus {
    guard(|| {
        non_null!(out);
        *out = ptr::null_mut();
        let cfg = try_status!(read_config(config_json));
        let beam = try_status!(cfg.beam_config().map_err(from_core));
        let json = serde_json::to_string(&classify(&beam, &cfg.damping)).expect("verdict serializes");
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        BeamlabStatus::Ok
    })
}

/// Releases a string returned by this library. `NULL` is ignored.
///
/// # Safety
/// `s` is `NULL` or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn beamlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into the library on the
/// same thread.
#[no_mangle]
pub extern "C" fn beamlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn beamlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

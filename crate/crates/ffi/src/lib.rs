//! C ABI for the decentralized optimization benchmark library.
//!
//! The surface is deliberately small: load a config file, execute the run it
//! describes, and read back the per-iteration trace. Handles are opaque;
//! every fallible call returns an [`AdomStatus`] code and stashes a
//! human-readable message retrievable with [`adom_last_error_message`].
//!
//! The generated header lives at `include/adom.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::path::Path;
use std::ptr;

use adom::bench::{self, BenchError, Execution};
use adom::config::RunConfig;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    OracleError = 4,
    NetworkError = 5,
    RunError = 6,
    IoError = 7,
    OutOfRange = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &BenchError) -> AdomStatus {
    match err {
        BenchError::Config(_) | BenchError::BadConfig(_) | BenchError::ChiTarget { .. } => {
            AdomStatus::ConfigError
        }
        BenchError::Oracle(_) => AdomStatus::OracleError,
        BenchError::Network(_) => AdomStatus::NetworkError,
        BenchError::Run(_) => AdomStatus::RunError,
        BenchError::Io(_) => AdomStatus::IoError,
        BenchError::Csv(_) => AdomStatus::IoError,
    }
}

/// Opaque handle to a parsed run configuration.
pub struct AdomConfig {
    inner: RunConfig,
}

/// Opaque handle to a finished run and its metric trace.
pub struct AdomTrace {
    inner: Execution,
}

/// One row of the metric trace. `lyapunov` is NaN when the potential was not
/// tracked (inexact oracle or non-quadratic objective).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdomTraceRow {
    pub iter: u64,
    pub comm_rounds: u64,
    pub dist_sq: f64,
    pub consensus_err: f64,
    pub func_gap: f64,
    pub lyapunov: f64,
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL (query mode).
#[no_mangle]
pub unsafe extern "C" fn adom_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Parses the config file at `path` into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adom_config_load(
    path: *const c_char,
    out: *mut *mut AdomConfig,
) -> AdomStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AdomStatus::NullPointer;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        set_error("path is not valid UTF-8");
        return AdomStatus::InvalidUtf8;
    };
    match RunConfig::from_path(Path::new(path)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(AdomConfig { inner }));
            AdomStatus::Ok
        }
        Err(err) => {
            set_error(err.to_string());
            *out = ptr::null_mut();
            AdomStatus::ConfigError
        }
    }
}

/// Frees a config handle. NULL is a no-op.
///
/// # Safety
/// `cfg` must come from [`adom_config_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn adom_config_free(cfg: *mut AdomConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Executes the configured run and stores a trace handle in `*out`.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adom_run_execute(
    cfg: *const AdomConfig,
    out: *mut *mut AdomTrace,
) -> AdomStatus {
    if cfg.is_null() || out.is_null() {
        set_error("null pointer argument");
        return AdomStatus::NullPointer;
    }
    match bench::execute(&(*cfg).inner) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(AdomTrace { inner }));
            AdomStatus::Ok
        }
        Err(err) => {
            let status = status_of(&err);
            set_error(err.to_string());
            *out = ptr::null_mut();
            status
        }
    }
}

/// Number of recorded rows (iterations + 1).
///
/// # Safety
/// `trace` must be a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn adom_trace_len(trace: *const AdomTrace) -> usize {
    if trace.is_null() {
        return 0;
    }
    (*trace).inner.trace.rows.len()
}

/// Copies row `idx` into `*row`.
///
/// # Safety
/// `trace` must be a live trace handle and `row` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adom_trace_row(
    trace: *const AdomTrace,
    idx: usize,
    row: *mut AdomTraceRow,
) -> AdomStatus {
    if trace.is_null() || row.is_null() {
        set_error("null pointer argument");
        return AdomStatus::NullPointer;
    }
    let rows = &(*trace).inner.trace.rows;
    let Some(r) = rows.get(idx) else {
        set_error(format!("row {idx} out of range (len {})", rows.len()));
        return AdomStatus::OutOfRange;
    };
    *row = AdomTraceRow {
        iter: r.iter as u64,
        comm_rounds: r.comm_rounds,
        dist_sq: r.dist_sq,
        consensus_err: r.consensus_err,
        func_gap: r.func_gap,
        lyapunov: r.lyapunov.unwrap_or(f64::NAN),
    };
    AdomStatus::Ok
}

/// Condition number chi = lambda_max / lambda_min_plus of the schedule used.
///
/// # Safety
/// `trace` must be a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn adom_trace_chi(trace: *const AdomTrace) -> f64 {
    if trace.is_null() {
        return f64::NAN;
    }
    (*trace).inner.bounds.chi()
}

/// Frees a trace handle. NULL is a no-op.
///
/// # Safety
/// `trace` must come from [`adom_run_execute`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn adom_trace_free(trace: *mut AdomTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

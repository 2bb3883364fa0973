//! C ABI over the training library: opaque handles, integer status codes,
//! and a thread-local error message.
//!
//! Handles returned through out-parameters are owned by the caller and
//! must be released with the matching `*_free` function. All entry points
//! catch panics and report them as `DEA_STATUS_PANIC` instead of
//! unwinding across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dea_core::config::{ConfigFile, Overrides};
use dea_core::error::TrainError;
use dea_core::trainer::{train, RunArtifacts, RunConfig};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    /// The run aborted on a non-finite loss or target.
    NonFinite = 4,
    Io = 5,
    IndexOutOfRange = 6,
    Panic = 7,
}

/// Opaque resolved run configuration.
pub struct DeaConfig {
    inner: RunConfig,
}

/// Opaque finished run: evaluation checkpoints, directional-parameter
/// trajectory, and update accounting.
pub struct DeaRun {
    inner: RunArtifacts,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Message for the most recent failure on this thread, or NULL when the
/// last call succeeded. The pointer stays valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn dea_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map(|c| c.as_ptr()).unwrap_or(ptr::null())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dea_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

fn guard<T>(out: *mut T, body: impl FnOnce() -> Result<T, (DeaStatus, String)>) -> DeaStatus {
    if out.is_null() {
        set_error("null out-parameter".into());
        return DeaStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(value)) => {
            clear_error();
            unsafe { out.write(value) };
            DeaStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let text = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(text);
            DeaStatus::Panic
        }
    }
}

/// Parse a TOML configuration document (same schema as the CLI accepts)
/// into a resolved config handle.
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dea_config_parse(
    toml_text: *const c_char,
    out: *mut *mut DeaConfig,
) -> DeaStatus {
    if toml_text.is_null() {
        set_error("null config text".into());
        return DeaStatus::NullPointer;
    }
    let text = CStr::from_ptr(toml_text);
    guard(out, || {
        let text = text
            .to_str()
            .map_err(|e| (DeaStatus::InvalidUtf8, format!("config text is not UTF-8: {e}")))?;
        let file =
            ConfigFile::parse_str(text).map_err(|e| (DeaStatus::InvalidConfig, e.to_string()))?;
        let cfg = file
            .resolve(&Overrides::default())
            .map_err(|e| (DeaStatus::InvalidConfig, e.to_string()))?;
        Ok(Box::into_raw(Box::new(DeaConfig { inner: cfg })))
    })
}

/// Default configuration (pendulum, dea, desk-interactive regime).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dea_config_default(out: *mut *mut DeaConfig) -> DeaStatus {
    guard(out, || {
        let cfg = ConfigFile::default()
            .resolve(&Overrides::default())
            .map_err(|e| (DeaStatus::InvalidConfig, e.to_string()))?;
        Ok(Box::into_raw(Box::new(DeaConfig { inner: cfg })))
    })
}

/// Override the run seed on an existing config handle.
///
/// # Safety
/// `cfg` must be a live handle from `dea_config_parse` or
/// `dea_config_default`.
#[no_mangle]
pub unsafe extern "C" fn dea_config_set_seed(cfg: *mut DeaConfig, seed: u64) -> DeaStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.inner.seed = seed;
            clear_error();
            DeaStatus::Ok
        }
        None => {
            set_error("null config handle".into());
            DeaStatus::NullPointer
        }
    }
}

/// Release a config handle. NULL is accepted.
///
/// # Safety
/// `cfg` must be NULL or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dea_config_free(cfg: *mut DeaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run one full training run. Blocks until the run finishes; artifacts
/// are also written to `out_dir` when the config names one.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dea_train(cfg: *const DeaConfig, out: *mut *mut DeaRun) -> DeaStatus {
    let Some(cfg) = cfg.as_ref() else {
        set_error("null config handle".into());
        return DeaStatus::NullPointer;
    };
    guard(out, || {
        let artifacts = train(&cfg.inner).map_err(|e| {
            let status = match &e {
                TrainError::NonFinite { .. } => DeaStatus::NonFinite,
                TrainError::Config(_) => DeaStatus::InvalidConfig,
                TrainError::Io { .. } => DeaStatus::Io,
            };
            (status, e.to_string())
        })?;
        Ok(Box::into_raw(Box::new(DeaRun { inner: artifacts })))
    })
}

/// Number of evaluation checkpoints recorded by the run.
///
/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn dea_run_eval_count(run: *const DeaRun) -> usize {
    run.as_ref().map(|r| r.inner.eval_records.len()).unwrap_or(0)
}

/// Read one evaluation checkpoint.
///
/// # Safety
/// `run` must be a live run handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dea_run_eval_at(
    run: *const DeaRun,
    index: usize,
    step: *mut u64,
    mean_return: *mut f64,
    std_return: *mut f64,
) -> DeaStatus {
    let Some(run) = run.as_ref() else {
        set_error("null run handle".into());
        return DeaStatus::NullPointer;
    };
    if step.is_null() || mean_return.is_null() || std_return.is_null() {
        set_error("null out-parameter".into());
        return DeaStatus::NullPointer;
    }
    match run.inner.eval_records.get(index) {
        Some(rec) => {
            step.write(rec.step as u64);
            mean_return.write(rec.mean_return);
            std_return.write(rec.std_return);
            clear_error();
            DeaStatus::Ok
        }
        None => {
            set_error(format!(
                "eval index {index} out of range ({} checkpoints)",
                run.inner.eval_records.len()
            ));
            DeaStatus::IndexOutOfRange
        }
    }
}

/// Mean evaluation return at the final checkpoint (NaN when the run never
/// evaluated).
///
/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn dea_run_final_return(run: *const DeaRun) -> f64 {
    run.as_ref().map(|r| r.inner.final_return()).unwrap_or(f64::NAN)
}

/// Number of per-step directional-parameter records (0 unless the method
/// was `dea`).
///
/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn dea_run_kappa_count(run: *const DeaRun) -> usize {
    run.as_ref().map(|r| r.inner.kappa_trace.len()).unwrap_or(0)
}

/// Read one directional-parameter record.
///
/// # Safety
/// `run` must be a live run handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dea_run_kappa_at(
    run: *const DeaRun,
    index: usize,
    step: *mut u64,
    kappa_bar: *mut f64,
    kappa: *mut f64,
    delta_mean: *mut f64,
    delta_bar_mean: *mut f64,
) -> DeaStatus {
    let Some(run) = run.as_ref() else {
        set_error("null run handle".into());
        return DeaStatus::NullPointer;
    };
    if step.is_null()
        || kappa_bar.is_null()
        || kappa.is_null()
        || delta_mean.is_null()
        || delta_bar_mean.is_null()
    {
        set_error("null out-parameter".into());
        return DeaStatus::NullPointer;
    }
    match run.inner.kappa_trace.get(index) {
        Some(rec) => {
            step.write(rec.step as u64);
            kappa_bar.write(rec.kappa_bar);
            kappa.write(rec.kappa);
            delta_mean.write(rec.delta_mean);
            delta_bar_mean.write(rec.delta_bar_mean);
            clear_error();
            DeaStatus::Ok
        }
        None => {
            set_error(format!(
                "kappa index {index} out of range ({} records)",
                run.inner.kappa_trace.len()
            ));
            DeaStatus::IndexOutOfRange
        }
    }
}

/// Release a run handle. NULL is accepted.
///
/// # Safety
/// `run` must be NULL or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dea_run_free(run: *mut DeaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

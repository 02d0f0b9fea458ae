//! C ABI over the experiment front-end. All entry points communicate JSON
//! strings and status codes; handles are opaque and freed by the matching
//! `_free` function. Strings returned through out-pointers are owned by the
//! caller and released with `coco_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use coco::config::ExperimentConfig;
use coco::experiment::run_experiment;
use coco::{analysis, Error};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CocoStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// The config failed to parse or violates an invariant.
    InvalidConfig = 2,
    /// A trajectory left the stability region.
    Diverged = 3,
    /// Any other runtime failure; see `coco_last_error`.
    RuntimeError = 4,
}

pub struct CocoExperiment {
    config: ExperimentConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_for(err: &Error) -> CocoStatus {
    match err {
        Error::Diverged { .. } => CocoStatus::Diverged,
        Error::InvalidConfig(_)
        | Error::InvalidGame(_)
        | Error::InvalidSchedule(_)
        | Error::Json(_)
        | Error::DimensionMismatch { .. } => CocoStatus::InvalidConfig,
        _ => CocoStatus::RuntimeError,
    }
}

fn fail(err: &Error) -> CocoStatus {
    set_error(err.to_string());
    status_for(err)
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn read_str<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

fn give_string(out: *mut *mut c_char, text: String) -> CocoStatus {
    match CString::new(text.replace('\0', " ")) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            CocoStatus::Ok
        }
        Err(_) => {
            set_error("string contained interior NUL".into());
            CocoStatus::RuntimeError
        }
    }
}

/// Message of the most recent error on this thread, or null. The caller owns
/// the returned string.
#[no_mangle]
pub extern "C" fn coco_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.clone().into_raw())
            .unwrap_or(ptr::null_mut())
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn coco_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON experiment config into an opaque handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn coco_experiment_parse(
    json: *const c_char,
    out: *mut *mut CocoExperiment,
) -> CocoStatus {
    if out.is_null() {
        return CocoStatus::NullPointer;
    }
    *out = ptr::null_mut();
    let Some(text) = read_str(json) else {
        set_error("config string is null or not UTF-8".into());
        return CocoStatus::NullPointer;
    };
    match serde_json::from_str::<serde_json::Value>(text)
        .map_err(Error::from)
        .and_then(ExperimentConfig::from_value)
    {
        Ok(config) => {
            *out = Box::into_raw(Box::new(CocoExperiment { config }));
            CocoStatus::Ok
        }
        Err(err) => fail(&err),
    }
}

/// Frees a handle returned by `coco_experiment_parse`. Null is ignored.
///
/// # Safety
/// `handle` must come from `coco_experiment_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn coco_experiment_free(handle: *mut CocoExperiment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Validates the config. On any violation returns `InvalidConfig` and, when
/// `diagnostics_out` is non-null, a JSON array of messages.
///
/// # Safety
/// `handle` must be a live handle; `diagnostics_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn coco_experiment_validate(
    handle: *const CocoExperiment,
    diagnostics_out: *mut *mut c_char,
) -> CocoStatus {
    let Some(experiment) = handle.as_ref() else {
        return CocoStatus::NullPointer;
    };
    let diagnostics = experiment.config.validate();
    if !diagnostics_out.is_null() {
        let json = serde_json::to_string(&diagnostics).unwrap_or_else(|_| "[]".into());
        if give_string(diagnostics_out, json) != CocoStatus::Ok {
            return CocoStatus::RuntimeError;
        }
    }
    if diagnostics.is_empty() {
        CocoStatus::Ok
    } else {
        set_error(diagnostics.join("; "));
        CocoStatus::InvalidConfig
    }
}

/// Runs the experiment, writing artifacts to `out_dir` with `parallelism`
/// worker threads (0 means one per available core).
///
/// # Safety
/// `handle` must be a live handle and `out_dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn coco_experiment_run(
    handle: *const CocoExperiment,
    out_dir: *const c_char,
    parallelism: usize,
) -> CocoStatus {
    let Some(experiment) = handle.as_ref() else {
        return CocoStatus::NullPointer;
    };
    let Some(dir) = read_str(out_dir) else {
        set_error("output directory is null or not UTF-8".into());
        return CocoStatus::NullPointer;
    };
    let workers = if parallelism == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        parallelism
    };
    match run_experiment(&experiment.config, Path::new(dir), workers) {
        Ok(_) => CocoStatus::Ok,
        Err(err) => fail(&err),
    }
}

/// Evaluates the theoretical constants and returns them as a JSON string.
///
/// # Safety
/// `handle` must be a live handle; `json_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coco_experiment_constants_json(
    handle: *const CocoExperiment,
    json_out: *mut *mut c_char,
) -> CocoStatus {
    let Some(experiment) = handle.as_ref() else {
        return CocoStatus::NullPointer;
    };
    if json_out.is_null() {
        return CocoStatus::NullPointer;
    }
    *json_out = ptr::null_mut();
    let result = experiment
        .config
        .run_config(0)
        .and_then(|reference| analysis::compute_constants(&reference))
        .and_then(|constants| Ok(serde_json::to_string_pretty(&constants)?));
    match result {
        Ok(json) => give_string(json_out, json),
        Err(err) => fail(&err),
    }
}

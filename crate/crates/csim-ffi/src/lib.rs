//! C ABI around the simulator: opaque scenario handles, status codes, and
//! JSON/CSV results as C strings. See `include/csim.h` for the header.
//!
//! Ownership rules: every `*mut` returned by this library is owned by the
//! caller and must be released with the matching `csim_*_free` function.
//! All strings are UTF-8 and NUL-terminated.

use csim_core::harness::{preset, run_experiment};
use csim_core::runner::{run_scenario, RunOptions};
use csim_core::ScenarioConfig;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsimStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    Internal = 5,
}

/// Opaque scenario handle.
pub struct CsimScenario {
    config: ScenarioConfig,
}

fn string_out(out: *mut *mut c_char, text: String) -> CsimStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            CsimStatus::Ok
        }
        Err(_) => CsimStatus::Internal,
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, CsimStatus> {
    if ptr.is_null() {
        return Err(CsimStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| CsimStatus::InvalidUtf8)
}

fn guarded(f: impl FnOnce() -> CsimStatus) -> CsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => CsimStatus::Internal,
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn csim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// New scenario with default parameters. Free with `csim_scenario_free`.
#[no_mangle]
pub extern "C" fn csim_scenario_default() -> *mut CsimScenario {
    Box::into_raw(Box::new(CsimScenario {
        config: ScenarioConfig::default(),
    }))
}

/// Parse a scenario from TOML text. Returns null on error; when `error_out`
/// is non-null it receives a message (free with `csim_string_free`).
///
/// # Safety
/// `toml_text` must point to a NUL-terminated string; `error_out`, when
/// non-null, must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn csim_scenario_from_toml(
    toml_text: *const c_char,
    error_out: *mut *mut c_char,
) -> *mut CsimScenario {
    let fail = |msg: String| {
        if !error_out.is_null() {
            if let Ok(s) = CString::new(msg) {
                *error_out = s.into_raw();
            }
        }
        ptr::null_mut()
    };
    let text = match read_str(toml_text) {
        Ok(t) => t,
        Err(_) => return fail("null or non-UTF-8 TOML text".into()),
    };
    match ScenarioConfig::from_toml_str(text) {
        Ok(config) => Box::into_raw(Box::new(CsimScenario { config })),
        Err(e) => fail(e.to_string()),
    }
}

/// Apply one dotted-key override, e.g. `("n_wbans", "12")`.
///
/// # Safety
/// `scenario` must be a live handle from this library; `key` and `value`
/// must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn csim_scenario_set(
    scenario: *mut CsimScenario,
    key: *const c_char,
    value: *const c_char,
) -> CsimStatus {
    guarded(|| {
        if scenario.is_null() {
            return CsimStatus::NullArgument;
        }
        let (key, value) = match (read_str(key), read_str(value)) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let handle = &mut *scenario;
        match handle.config.with_overrides(&[format!("{key}={value}")]) {
            Ok(next) => {
                handle.config = next;
                CsimStatus::Ok
            }
            Err(_) => CsimStatus::InvalidConfig,
        }
    })
}

/// Release a scenario handle.
///
/// # Safety
/// `scenario` must be null or a handle returned by this library, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn csim_scenario_free(scenario: *mut CsimScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulate one scenario; on success `summary_json_out` receives the run
/// summary as a JSON document (free with `csim_string_free`).
///
/// # Safety
/// `scenario` must be a live handle; `summary_json_out` must point to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn csim_run(
    scenario: *const CsimScenario,
    summary_json_out: *mut *mut c_char,
) -> CsimStatus {
    guarded(|| {
        if scenario.is_null() || summary_json_out.is_null() {
            return CsimStatus::NullArgument;
        }
        let cfg = &(*scenario).config;
        if cfg.validate().is_err() {
            return CsimStatus::InvalidConfig;
        }
        let out = run_scenario(cfg, &RunOptions::default());
        match serde_json::to_string_pretty(&out.summary) {
            Ok(json) => string_out(summary_json_out, json),
            Err(_) => CsimStatus::Internal,
        }
    })
}

/// Run a shipped sweep preset ("exp1".."exp5"); on success `csv_out`
/// receives the aggregated table as CSV text (free with `csim_string_free`).
/// `replications` overrides the preset's replication count when positive.
///
/// # Safety
/// `name` must be a NUL-terminated string; `csv_out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn csim_sweep_preset(
    name: *const c_char,
    replications: i32,
    csv_out: *mut *mut c_char,
) -> CsimStatus {
    guarded(|| {
        if csv_out.is_null() {
            return CsimStatus::NullArgument;
        }
        let name = match read_str(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let mut spec = match preset(name) {
            Ok(s) => s,
            Err(_) => return CsimStatus::InvalidConfig,
        };
        if replications > 0 {
            spec.replications = replications as u32;
        }
        match run_experiment(&spec) {
            Ok(table) => string_out(csv_out, table.to_csv()),
            Err(_) => CsimStatus::Internal,
        }
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string pointer returned by this library, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn csim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

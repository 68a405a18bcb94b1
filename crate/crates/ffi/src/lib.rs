//! C ABI over the scenario runner.
//!
//! Every function returns an [`SsaggStatus`]; on failure a message is kept per
//! thread and can be read with [`ssagg_last_error`]. Scenarios and results are
//! opaque handles released with their `_free` function. Strings handed out by
//! the library are released with [`ssagg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssagg::aggregator::Mode;
use ssagg::cli;
use ssagg::crypto::ProviderKind;
use ssagg::netsim::{run_scenario_with, RunOptions, ScenarioConfig, ScenarioResult, SimError};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsaggStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The scenario does not parse or does not validate.
    Config = 3,
    /// The simulation could not finish.
    RunFailed = 4,
    NotFound = 5,
    InvalidArgument = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsaggMode {
    /// Use the mode each acquisition declares.
    Declared = 0,
    OnChain = 1,
    OffChain = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsaggProvider {
    Deterministic = 0,
    System = 1,
}

/// Overrides for a run. Pass a null pointer to run as declared.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsaggRunOptions {
    pub mode: SsaggMode,
    /// Negative: as declared; zero: off; positive: on.
    pub strict: c_int,
    pub provider: SsaggProvider,
    /// Non-zero runs one thread per actor.
    pub threaded: c_int,
}

/// A parsed scenario.
pub struct SsaggScenario {
    config: ScenarioConfig,
}

/// A finished scenario run.
pub struct SsaggResult {
    result: ScenarioResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: SsaggStatus, message: impl Into<String>) -> SsaggStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> SsaggStatus) -> SsaggStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SsaggStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, SsaggStatus> {
    if s.is_null() {
        return Err(fail(SsaggStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(SsaggStatus::InvalidUtf8, "argument is not UTF-8"))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ssagg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ssagg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a scenario from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_scenario_from_json(json: *const c_char, out: *mut *mut SsaggScenario) -> SsaggStatus {
    guard(|| {
        if out.is_null() {
            return fail(SsaggStatus::NullPointer, "null output pointer");
        }
        let json = match text(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ScenarioConfig::from_json(json) {
            Ok(config) => {
                *out = Box::into_raw(Box::new(SsaggScenario { config }));
                SsaggStatus::Ok
            }
            Err(e) => fail(SsaggStatus::Config, e.to_string()),
        }
    })
}

/// Loads one of the scenarios shipped with the library by name.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_scenario_bundled(name: *const c_char, out: *mut *mut SsaggScenario) -> SsaggStatus {
    guard(|| {
        let name = match text(name) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match cli::bundled(name) {
            Some(json) => {
                let json = CString::new(json).expect("bundled scenarios are text");
                ssagg_scenario_from_json(json.as_ptr(), out)
            }
            None => fail(SsaggStatus::NotFound, format!("no bundled scenario `{name}`")),
        }
    })
}

/// Serializes a scenario back to JSON. Free the string with `ssagg_string_free`.
///
/// # Safety
/// `scenario` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_scenario_to_json(scenario: *const SsaggScenario, out: *mut *mut c_char) -> SsaggStatus {
    guard(|| match (scenario.as_ref(), out.is_null()) {
        (Some(s), false) => {
            *out = to_c(s.config.to_json());
            SsaggStatus::Ok
        }
        _ => fail(SsaggStatus::NullPointer, "null argument"),
    })
}

/// # Safety
/// `scenario` must come from this library or be null, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssagg_scenario_free(scenario: *mut SsaggScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a scenario with the seed and optional overrides (`options` may be null).
///
/// A run whose assertions fail still returns `Ok`; check
/// `ssagg_result_passed`.
///
/// # Safety
/// `scenario` must come from this library; `options` must be null or valid;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_scenario_run(
    scenario: *const SsaggScenario,
    seed: u64,
    options: *const SsaggRunOptions,
    out: *mut *mut SsaggResult,
) -> SsaggStatus {
    guard(|| {
        let Some(scenario) = scenario.as_ref() else {
            return fail(SsaggStatus::NullPointer, "null scenario");
        };
        if out.is_null() {
            return fail(SsaggStatus::NullPointer, "null output pointer");
        }
        let mut opts = RunOptions::default();
        if let Some(o) = options.as_ref() {
            opts.mode = match o.mode {
                SsaggMode::Declared => None,
                SsaggMode::OnChain => Some(Mode::OnChain),
                SsaggMode::OffChain => Some(Mode::OffChain),
            };
            opts.strict = (o.strict >= 0).then_some(o.strict > 0);
            opts.provider = match o.provider {
                SsaggProvider::Deterministic => ProviderKind::Deterministic,
                SsaggProvider::System => ProviderKind::System,
            };
            opts.threaded = o.threaded != 0;
        }
        match run_scenario_with(&scenario.config, seed, &opts) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(SsaggResult { result }));
                SsaggStatus::Ok
            }
            Err(SimError::Config(e)) => fail(SsaggStatus::Config, e.to_string()),
            Err(e) => fail(SsaggStatus::RunFailed, e.to_string()),
        }
    })
}

/// 1 when every assertion of the scenario held, 0 otherwise or for null.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_passed(result: *const SsaggResult) -> c_int {
    result.as_ref().map_or(0, |r| c_int::from(r.result.passed()))
}

/// Number of acquisitions in the result; 0 for null.
///
/// # Safety
/// `result` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_run_count(result: *const SsaggResult) -> usize {
    result.as_ref().map_or(0, |r| r.result.runs.len())
}

/// Canonical JSON report. Free the string with `ssagg_string_free`.
///
/// # Safety
/// `result` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_report(result: *const SsaggResult, out: *mut *mut c_char) -> SsaggStatus {
    guard(|| match (result.as_ref(), out.is_null()) {
        (Some(r), false) => {
            *out = to_c(cli::report_json(&r.result));
            SsaggStatus::Ok
        }
        _ => fail(SsaggStatus::NullPointer, "null argument"),
    })
}

/// The event trace, one canonical JSON object per line.
///
/// # Safety
/// `result` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_trace(result: *const SsaggResult, out: *mut *mut c_char) -> SsaggStatus {
    guard(|| match (result.as_ref(), out.is_null()) {
        (Some(r), false) => {
            *out = to_c(r.result.trace.to_lines());
            SsaggStatus::Ok
        }
        _ => fail(SsaggStatus::NullPointer, "null argument"),
    })
}

/// Writes the 32-byte trace digest into `digest`.
///
/// # Safety
/// `result` must come from this library; `digest` must point to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_trace_digest(result: *const SsaggResult, digest: *mut u8) -> SsaggStatus {
    guard(|| match (result.as_ref(), digest.is_null()) {
        (Some(r), false) => {
            let d = r.result.trace.digest();
            ptr::copy_nonoverlapping(d.as_bytes().as_ptr(), digest, 32);
            SsaggStatus::Ok
        }
        _ => fail(SsaggStatus::NullPointer, "null argument"),
    })
}

/// Canonical JSON of the output envelope of acquisition `index`. Sets `*out`
/// to null when that acquisition produced no output.
///
/// # Safety
/// `result` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_output(result: *const SsaggResult, index: usize, out: *mut *mut c_char) -> SsaggStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            return fail(SsaggStatus::NullPointer, "null argument");
        };
        let Some(run) = r.result.runs.get(index) else {
            return fail(SsaggStatus::InvalidArgument, format!("no acquisition at index {index}"));
        };
        *out = match &run.outcome.output {
            Some(envelope) => match ssagg::canonical::to_string(envelope) {
                Ok(s) => to_c(s),
                Err(e) => return fail(SsaggStatus::RunFailed, e.to_string()),
            },
            None => ptr::null_mut(),
        };
        SsaggStatus::Ok
    })
}

/// # Safety
/// `result` must come from this library or be null, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssagg_result_free(result: *mut SsaggResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be null, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssagg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

//! C ABI for the complygen toolkit.
//!
//! Opaque handles wrap parsed schemas and oracle sets; everything else
//! crosses the boundary as NUL-terminated UTF-8 in the same formats the
//! CLI uses (schema text, oracle JSONL, trace-file JSON, call scripts,
//! test-case JSON). Functions return a [`CgStatus`]; on any non-`Ok`
//! status the message is available from `cg_last_error_message` until the
//! next call on the same thread.
//!
//! Strings returned through out-pointers are owned by the caller and must
//! be released with `cg_string_free`. Handles are released with their
//! `_free` functions; all `_free` functions accept NULL.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use complygen_core::evaluator::{evaluate_candidate, CandidateSolution};
use complygen_core::fuzzer::{synthesize_trace, FuzzConfig, FuzzError, TraceFile};
use complygen_core::ltl::{evaluate, parse_oracle_file, validate_signature, SafetyOracle};
use complygen_core::schema::{load_toolset, Toolset};
use complygen_core::testgen::{mask_trace, TestCase};

/// Result codes. Non-zero codes leave a message in
/// `cg_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    ParseError = 1,
    ValidationError = 2,
    Exhausted = 3,
    InvalidArgument = 4,
    Utf8Error = 5,
}

pub struct CgToolset(Toolset);

pub struct CgOracleSet(Vec<SafetyOracle>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::default());
}

fn fail(status: CgStatus, msg: impl Into<String>) -> CgStatus {
    set_error(msg);
    status
}

/// # Safety
/// `ptr` must be NULL or a valid NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, CgStatus> {
    if ptr.is_null() {
        return Err(fail(CgStatus::InvalidArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(CgStatus::Utf8Error, format!("{what} is not valid UTF-8")))
}

fn give_string(s: String, out: *mut *mut c_char) -> CgStatus {
    if out.is_null() {
        return fail(CgStatus::InvalidArgument, "output pointer is NULL");
    }
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            CgStatus::Ok
        }
        Err(_) => fail(CgStatus::InvalidArgument, "output contains a NUL byte"),
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Caller frees the
/// returned string with `cg_string_free`. Empty string when no error.
#[no_mangle]
pub extern "C" fn cg_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().into_raw())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by this library and
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a schema document.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn cg_toolset_parse(
    text: *const c_char,
    out: *mut *mut CgToolset,
) -> CgStatus {
    clear_error();
    if out.is_null() {
        return fail(CgStatus::InvalidArgument, "out is NULL");
    }
    let text = match read_str(text, "schema text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match load_toolset(text) {
        Ok(ts) => {
            *out = Box::into_raw(Box::new(CgToolset(ts)));
            CgStatus::Ok
        }
        Err(e) => fail(CgStatus::ParseError, e.to_string()),
    }
}

/// # Safety
/// `ts` must be NULL or a pointer from `cg_toolset_parse`, freed once.
#[no_mangle]
pub unsafe extern "C" fn cg_toolset_free(ts: *mut CgToolset) {
    if !ts.is_null() {
        drop(Box::from_raw(ts));
    }
}

/// Number of APIs; 0 when `ts` is NULL.
///
/// # Safety
/// `ts` must be NULL or a valid toolset handle.
#[no_mangle]
pub unsafe extern "C" fn cg_toolset_api_count(ts: *const CgToolset) -> u32 {
    ts.as_ref().map(|t| t.0.apis.len() as u32).unwrap_or(0)
}

/// Number of safety-critical APIs; 0 when `ts` is NULL.
///
/// # Safety
/// `ts` must be NULL or a valid toolset handle.
#[no_mangle]
pub unsafe extern "C" fn cg_toolset_safety_api_count(ts: *const CgToolset) -> u32 {
    ts.as_ref()
        .map(|t| t.0.safety_apis().count() as u32)
        .unwrap_or(0)
}

/// Renders the toolset in canonical schema text.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_toolset_render(
    ts: *const CgToolset,
    out: *mut *mut c_char,
) -> CgStatus {
    clear_error();
    let Some(ts) = ts.as_ref() else {
        return fail(CgStatus::InvalidArgument, "toolset is NULL");
    };
    give_string(complygen_core::schema::render_toolset(&ts.0), out)
}

/// Parses an oracle file (JSONL) and validates every oracle's signature
/// against the toolset. Rejections are `ValidationError`s naming the
/// unknown atoms.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_oracles_parse(
    text: *const c_char,
    ts: *const CgToolset,
    out: *mut *mut CgOracleSet,
) -> CgStatus {
    clear_error();
    if out.is_null() {
        return fail(CgStatus::InvalidArgument, "out is NULL");
    }
    let Some(ts) = ts.as_ref() else {
        return fail(CgStatus::InvalidArgument, "toolset is NULL");
    };
    let text = match read_str(text, "oracle text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let oracles = match parse_oracle_file(text) {
        Ok(o) => o,
        Err(e) => return fail(CgStatus::ParseError, e.to_string()),
    };
    for o in &oracles {
        if let complygen_core::ltl::ValidationResult::Reject { unknown_atoms } =
            validate_signature(o, &ts.0)
        {
            return fail(
                CgStatus::ValidationError,
                format!("oracle `{}`: unknown atoms {:?}", o.id, unknown_atoms),
            );
        }
    }
    *out = Box::into_raw(Box::new(CgOracleSet(oracles)));
    CgStatus::Ok
}

/// # Safety
/// `os` must be NULL or a pointer from `cg_oracles_parse`, freed once.
#[no_mangle]
pub unsafe extern "C" fn cg_oracles_free(os: *mut CgOracleSet) {
    if !os.is_null() {
        drop(Box::from_raw(os));
    }
}

/// Number of oracles; 0 when `os` is NULL.
///
/// # Safety
/// `os` must be NULL or a valid oracle-set handle.
#[no_mangle]
pub unsafe extern "C" fn cg_oracles_count(os: *const CgOracleSet) -> u32 {
    os.as_ref().map(|o| o.0.len() as u32).unwrap_or(0)
}

/// Synthesizes a compliant trace and writes it as trace-file JSON. An
/// unsatisfiable search returns `Exhausted`.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_fuzz_trace(
    ts: *const CgToolset,
    os: *const CgOracleSet,
    target_length: u32,
    seed: u64,
    max_backtracks: u32,
    max_candidates_per_step: u32,
    require_business_action: bool,
    out_trace_json: *mut *mut c_char,
) -> CgStatus {
    clear_error();
    let Some(ts) = ts.as_ref() else {
        return fail(CgStatus::InvalidArgument, "toolset is NULL");
    };
    let Some(os) = os.as_ref() else {
        return fail(CgStatus::InvalidArgument, "oracle set is NULL");
    };
    let config = FuzzConfig {
        target_length: target_length as usize,
        seed,
        max_backtracks: max_backtracks as usize,
        max_candidates_per_step: max_candidates_per_step as usize,
        require_business_action,
    };
    match synthesize_trace(&ts.0, &os.0, &config) {
        Ok(result) => give_string(
            TraceFile::new(&ts.0, &config, &result.trace).to_json(),
            out_trace_json,
        ),
        Err(e @ FuzzError::Exhausted { .. }) => fail(CgStatus::Exhausted, e.to_string()),
        Err(e @ FuzzError::SignatureRejected { .. }) => {
            fail(CgStatus::ValidationError, e.to_string())
        }
        Err(e) => fail(CgStatus::InvalidArgument, e.to_string()),
    }
}

/// Removes every safety-critical action from a trace-file JSON document,
/// writing the masked document.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_mask_trace(
    ts: *const CgToolset,
    trace_json: *const c_char,
    out_trace_json: *mut *mut c_char,
) -> CgStatus {
    clear_error();
    let Some(ts) = ts.as_ref() else {
        return fail(CgStatus::InvalidArgument, "toolset is NULL");
    };
    let text = match read_str(trace_json, "trace JSON") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let mut file = match TraceFile::from_json(text) {
        Ok(f) => f,
        Err(e) => return fail(CgStatus::ParseError, e.to_string()),
    };
    match mask_trace(&file.trace(), &ts.0) {
        Ok(masked) => {
            file.actions = masked.actions;
            give_string(file.to_json(), out_trace_json)
        }
        Err(e) => fail(CgStatus::ValidationError, e.to_string()),
    }
}

/// True iff every oracle in the set holds over the trace.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_satisfies(
    os: *const CgOracleSet,
    trace_json: *const c_char,
    out: *mut bool,
) -> CgStatus {
    clear_error();
    let Some(os) = os.as_ref() else {
        return fail(CgStatus::InvalidArgument, "oracle set is NULL");
    };
    if out.is_null() {
        return fail(CgStatus::InvalidArgument, "out is NULL");
    }
    let text = match read_str(trace_json, "trace JSON") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let file = match TraceFile::from_json(text) {
        Ok(f) => f,
        Err(e) => return fail(CgStatus::ParseError, e.to_string()),
    };
    let trace = file.trace();
    *out = os.0.iter().all(|o| evaluate(&o.formula, &trace));
    CgStatus::Ok
}

/// Grades a candidate call script against a test case (the bundle's JSON
/// record for one case) and writes the outcome as JSON.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_evaluate_candidate(
    ts: *const CgToolset,
    case_json: *const c_char,
    candidate_script: *const c_char,
    out_outcome_json: *mut *mut c_char,
) -> CgStatus {
    clear_error();
    let Some(ts) = ts.as_ref() else {
        return fail(CgStatus::InvalidArgument, "toolset is NULL");
    };
    let case_text = match read_str(case_json, "case JSON") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let script = match read_str(candidate_script, "candidate script") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let case: TestCase = match serde_json::from_str(case_text) {
        Ok(c) => c,
        Err(e) => return fail(CgStatus::ParseError, format!("case JSON: {e}")),
    };
    let outcome = evaluate_candidate(&case, &CandidateSolution::script(script, "ffi"), &ts.0);
    give_string(
        serde_json::to_string_pretty(&outcome).expect("outcome serializes"),
        out_outcome_json,
    )
}

/// Computes both coverage metrics over a JSON array of trace-file
/// documents, writing the report as JSON.
///
/// # Safety
/// Pointer contracts as above.
#[no_mangle]
pub unsafe extern "C" fn cg_coverage_report(
    ts: *const CgToolset,
    traces_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> CgStatus {
    clear_error();
    let Some(ts) = ts.as_ref() else {
        return fail(CgStatus::InvalidArgument, "toolset is NULL");
    };
    let text = match read_str(traces_json, "traces JSON") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let files: Vec<TraceFile> = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => return fail(CgStatus::ParseError, e.to_string()),
    };
    let traces: Vec<_> = files.iter().map(|f| f.trace()).collect();
    match complygen_core::coverage::coverage_report(&traces, &ts.0) {
        Ok(report) => give_string(
            serde_json::to_string_pretty(&report).expect("report serializes"),
            out_report_json,
        ),
        Err(e) => fail(CgStatus::ValidationError, e.to_string()),
    }
}

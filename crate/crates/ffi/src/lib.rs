//! C ABI over the summoning library.
//!
//! Tasks and plans are opaque handles created from JSON and released with
//! their `_free` function. Reports come back as JSON strings owned by the
//! caller, to be released with [`summon_string_free`]. Every call returns a
//! [`SummonStatus`]; on failure [`summon_last_error`] describes what went
//! wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use summoning::feasibility::classically_possible;
use summoning::protocol::{run, run_exhaustive, synthesize, ExhaustiveOptions, SynthesisError, SynthesisOptions};
use summoning::spacetime::{causally_precedes, SpacetimePoint};
use summoning::task::{validate, Assignment, SummoningTask, TaskDocument};
use summoning::ProtocolPlan;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidTask = 4,
    /// The task cannot be solved with a classical token.
    Impossible = 5,
    /// No quantum protocol was synthesized; the output lists the reasons.
    Refused = 6,
    Internal = 7,
}

/// Opaque validated task.
pub struct SummonTask(SummoningTask);

/// Opaque synthesized protocol plan.
pub struct SummonPlan(ProtocolPlan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn fail(status: SummonStatus, msg: impl Into<String>) -> SummonStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SummonStatus) -> SummonStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SummonStatus::Internal, "internal panic"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, SummonStatus> {
    if s.is_null() {
        return Err(fail(SummonStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| fail(SummonStatus::InvalidUtf8, e.to_string()))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) {
    let c = CString::new(text.replace('\0', " ")).expect("nul bytes removed");
    *out = c.into_raw();
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn summon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn summon_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn summon_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a task document. On `INVALID_TASK` the violations
/// are written to `report` as JSON when it is non-null.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
/// `report` may be null.
#[no_mangle]
pub unsafe extern "C" fn summon_task_from_json(
    json: *const c_char,
    out: *mut *mut SummonTask,
    report: *mut *mut c_char,
) -> SummonStatus {
    guard(|| {
        if out.is_null() {
            return fail(SummonStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        if !report.is_null() {
            *report = ptr::null_mut();
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let doc = match TaskDocument::from_json(text) {
            Ok(d) => d,
            Err(e) => return fail(SummonStatus::ParseError, e.to_string()),
        };
        let validation = validate(&doc);
        if !validation.valid {
            if !report.is_null() {
                write_string(report, serde_json::to_string(&validation).expect("report serializes"));
            }
            return fail(SummonStatus::InvalidTask, format!("{} violation(s)", validation.violations.len()));
        }
        match SummoningTask::from_document(&doc) {
            Ok(task) => {
                *out = Box::into_raw(Box::new(SummonTask(task)));
                SummonStatus::Ok
            }
            Err(e) => fail(SummonStatus::InvalidTask, e.to_string()),
        }
    })
}

/// # Safety
/// `task` must come from [`summon_task_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn summon_task_free(task: *mut SummonTask) {
    if !task.is_null() {
        drop(Box::from_raw(task));
    }
}

/// Decides classical possibility and writes the verdict as JSON. Returns
/// `OK` when possible and `IMPOSSIBLE` otherwise; both fill `verdict`.
///
/// # Safety
/// `task` must be a live handle and `verdict` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn summon_task_check(task: *const SummonTask, verdict: *mut *mut c_char) -> SummonStatus {
    guard(|| {
        if task.is_null() || verdict.is_null() {
            return fail(SummonStatus::NullPointer, "null argument");
        }
        *verdict = ptr::null_mut();
        match classically_possible(&(*task).0) {
            Ok(v) => {
                write_string(verdict, serde_json::to_string(&v).expect("verdict serializes"));
                if v.possible {
                    SummonStatus::Ok
                } else {
                    SummonStatus::Impossible
                }
            }
            Err(e) => fail(SummonStatus::Internal, e.to_string()),
        }
    })
}

/// Synthesizes a protocol with secrets of dimension `secret_dim`. On
/// `REFUSED` the reasons are written to `refusal` as JSON when non-null.
///
/// # Safety
/// `task` must be a live handle and `out` a valid pointer. `refusal` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn summon_synthesize(
    task: *const SummonTask,
    secret_dim: u32,
    out: *mut *mut SummonPlan,
    refusal: *mut *mut c_char,
) -> SummonStatus {
    guard(|| {
        if task.is_null() || out.is_null() {
            return fail(SummonStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        if !refusal.is_null() {
            *refusal = ptr::null_mut();
        }
        let options = SynthesisOptions {
            secret_dim: secret_dim as usize,
            ..SynthesisOptions::default()
        };
        match synthesize(&(*task).0, &options) {
            Ok(plan) => {
                *out = Box::into_raw(Box::new(SummonPlan(plan)));
                SummonStatus::Ok
            }
            Err(SynthesisError::Refused(r)) => {
                if !refusal.is_null() {
                    write_string(refusal, serde_json::to_string(&r.reasons).expect("reasons serialize"));
                }
                fail(SummonStatus::Refused, r.to_string())
            }
            Err(e) => fail(SummonStatus::Internal, e.to_string()),
        }
    })
}

/// # Safety
/// `plan` must come from [`summon_synthesize`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn summon_plan_free(plan: *mut SummonPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Writes the plan as JSON.
///
/// # Safety
/// `plan` must be a live handle and `json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn summon_plan_to_json(plan: *const SummonPlan, json: *mut *mut c_char) -> SummonStatus {
    guard(|| {
        if plan.is_null() || json.is_null() {
            return fail(SummonStatus::NullPointer, "null argument");
        }
        write_string(json, serde_json::to_string(&(*plan).0).expect("plan serializes"));
        SummonStatus::Ok
    })
}

/// Runs the plan for one assignment of `len` input values and writes the
/// outcome as JSON.
///
/// # Safety
/// `plan` must be a live handle, `values` must point to `len` integers (or
/// be null with `len == 0`) and `outcome` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn summon_run(
    plan: *const SummonPlan,
    values: *const u32,
    len: usize,
    seed: u64,
    outcome: *mut *mut c_char,
) -> SummonStatus {
    guard(|| {
        if plan.is_null() || outcome.is_null() || (values.is_null() && len > 0) {
            return fail(SummonStatus::NullPointer, "null argument");
        }
        *outcome = ptr::null_mut();
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(values, len).to_vec()
        };
        match run(&(*plan).0, &Assignment(values), seed) {
            Ok(r) => {
                write_string(outcome, serde_json::to_string(&r).expect("outcome serializes"));
                SummonStatus::Ok
            }
            Err(e) => fail(SummonStatus::InvalidTask, e.to_string()),
        }
    })
}

/// Runs every allowed assignment and writes the report as JSON. `jobs` of
/// zero uses the default thread pool.
///
/// # Safety
/// Both handles must be live, `plan` synthesized from `task`, and `report`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn summon_run_exhaustive(
    task: *const SummonTask,
    plan: *const SummonPlan,
    seed: u64,
    jobs: usize,
    report: *mut *mut c_char,
) -> SummonStatus {
    guard(|| {
        if task.is_null() || plan.is_null() || report.is_null() {
            return fail(SummonStatus::NullPointer, "null argument");
        }
        *report = ptr::null_mut();
        let options = ExhaustiveOptions {
            jobs: (jobs > 0).then_some(jobs),
            ..ExhaustiveOptions::default()
        };
        match run_exhaustive(&(*task).0, &(*plan).0, seed, &options) {
            Ok(r) => {
                write_string(report, serde_json::to_string(&r).expect("report serializes"));
                SummonStatus::Ok
            }
            Err(e) => fail(SummonStatus::Internal, e.to_string()),
        }
    })
}

/// Whether a causal curve can run from `a` to `b`. Each point is `dim + 1`
/// doubles, time first.
///
/// # Safety
/// `a` and `b` must each point to `dim + 1` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn summon_causally_precedes(
    a: *const f64,
    b: *const f64,
    dim: usize,
    out: *mut bool,
) -> SummonStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(SummonStatus::NullPointer, "null argument");
        }
        let a = std::slice::from_raw_parts(a, dim + 1);
        let b = std::slice::from_raw_parts(b, dim + 1);
        let point = |c: &[f64]| SpacetimePoint::from_f64(c[0], &c[1..]);
        let result = point(a)
            .and_then(|pa| point(b).map(|pb| (pa, pb)))
            .and_then(|(pa, pb)| causally_precedes(&pa, &pb));
        match result {
            Ok(v) => {
                *out = v;
                SummonStatus::Ok
            }
            Err(e) => fail(SummonStatus::ParseError, e.to_string()),
        }
    })
}

use std::ffi::{CStr, CString};
use std::ptr;

use summoning::scenarios;
use summoning_ffi::*;

fn take(s: *mut std::ffi::c_char) -> serde_json::Value {
    assert!(!s.is_null());
    let v = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    unsafe { summon_string_free(s) };
    v
}

fn load(task: &summoning::SummoningTask) -> *mut SummonTask {
    let json = CString::new(task.to_json_pretty()).unwrap();
    let mut handle = ptr::null_mut();
    let status = unsafe { summon_task_from_json(json.as_ptr(), &mut handle, ptr::null_mut()) };
    assert_eq!(status, SummonStatus::Ok);
    handle
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(summon_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn g1_round_trip_through_the_abi() {
    let task = load(&scenarios::g1());
    let mut verdict = ptr::null_mut();
    assert_eq!(unsafe { summon_task_check(task, &mut verdict) }, SummonStatus::Ok);
    assert_eq!(take(verdict)["possible"], true);

    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { summon_synthesize(task, 3, &mut plan, ptr::null_mut()) }, SummonStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { summon_plan_to_json(plan, &mut json) }, SummonStatus::Ok);
    assert_eq!(take(json)["routes"].as_array().unwrap().len(), 1);

    let values = [0u32, 1];
    let mut outcome = ptr::null_mut();
    assert_eq!(unsafe { summon_run(plan, values.as_ptr(), 2, 9, &mut outcome) }, SummonStatus::Ok);
    let outcome = take(outcome);
    assert_eq!(outcome["returned_at"], outcome["expected"]);

    let mut report = ptr::null_mut();
    assert_eq!(unsafe { summon_run_exhaustive(task, plan, 9, 2, &mut report) }, SummonStatus::Ok);
    let report = take(report);
    assert_eq!(report["runs"], 4);
    assert_eq!(report["mismatches"], 0);

    unsafe {
        summon_plan_free(plan);
        summon_task_free(task);
    }
}

#[test]
fn constrained_task_is_refused_with_reasons() {
    let task = load(&scenarios::no_summoning());
    let mut plan = ptr::null_mut();
    let mut refusal = ptr::null_mut();
    assert_eq!(unsafe { summon_synthesize(task, 3, &mut plan, &mut refusal) }, SummonStatus::Refused);
    assert!(plan.is_null());
    let reasons = take(refusal);
    assert!(reasons.as_array().unwrap().iter().any(|r| r["kind"] == "constrained_inputs"));
    assert!(!summon_last_error().is_null());
    unsafe { summon_task_free(task) };
}

#[test]
fn impossible_task_reports_impossible() {
    let task = load(&scenarios::no_summoning_unconstrained());
    let mut verdict = ptr::null_mut();
    assert_eq!(unsafe { summon_task_check(task, &mut verdict) }, SummonStatus::Impossible);
    assert_eq!(take(verdict)["possible"], false);
    unsafe { summon_task_free(task) };
}

#[test]
fn bad_input_maps_to_status_codes() {
    let mut handle = ptr::null_mut();
    let garbage = CString::new("{ not json").unwrap();
    assert_eq!(
        unsafe { summon_task_from_json(garbage.as_ptr(), &mut handle, ptr::null_mut()) },
        SummonStatus::ParseError
    );
    assert!(handle.is_null());
    assert_eq!(
        unsafe { summon_task_from_json(ptr::null(), &mut handle, ptr::null_mut()) },
        SummonStatus::NullPointer
    );
    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { summon_task_from_json(bad_utf8.as_ptr().cast(), &mut handle, ptr::null_mut()) },
        SummonStatus::InvalidUtf8
    );

    let mut doc: serde_json::Value = serde_json::from_str(&scenarios::g1().to_json_pretty()).unwrap();
    doc["returns"] = serde_json::json!([]);
    let invalid = CString::new(doc.to_string()).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { summon_task_from_json(invalid.as_ptr(), &mut handle, &mut report) },
        SummonStatus::InvalidTask
    );
    assert_eq!(take(report)["valid"], false);
}

#[test]
fn causal_order_through_the_abi() {
    let a = [0.0, 0.0];
    let inside = [2.0, 1.0];
    let lightlike = [1.0, 1.0];
    let outside = [1.0, 2.0];
    let mut out = false;
    for (b, want) in [(inside, true), (lightlike, true), (outside, false)] {
        assert_eq!(unsafe { summon_causally_precedes(a.as_ptr(), b.as_ptr(), 1, &mut out) }, SummonStatus::Ok);
        assert_eq!(out, want, "{b:?}");
    }
    let nan = [f64::NAN, 0.0];
    assert_eq!(
        unsafe { summon_causally_precedes(a.as_ptr(), nan.as_ptr(), 1, &mut out) },
        SummonStatus::ParseError
    );
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/summon.h")).unwrap();
    for name in [
        "summon_version",
        "summon_last_error",
        "summon_string_free",
        "summon_task_from_json",
        "summon_task_free",
        "summon_task_check",
        "summon_synthesize",
        "summon_plan_free",
        "summon_plan_to_json",
        "summon_run",
        "summon_run_exhaustive",
        "summon_causally_precedes",
        "typedef struct SummonTask SummonTask",
        "SUMMON_STATUS_REFUSED = 6",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

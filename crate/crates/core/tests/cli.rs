use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use summoning::scenarios::SCENARIOS;

fn summon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_summon"))
        .args(args)
        .env_remove("SUMMON_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn gen(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    let out = summon(&["gen", name, "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g0 = gen(dir.path(), "no_summoning");
    let out = summon(&["check", s(&g0)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["possible"], true);
    assert_eq!(v["constrained"], true);
    assert!(v["note"].as_str().unwrap().contains("constrained"));
    assert!(v["screens"].as_array().unwrap().iter().all(|s| s["informational"] == true || s["passed"] == true));

    let g1 = gen(dir.path(), "g1");
    let v = json(&summon(&["check", s(&g1)]));
    assert!(v["screens"].as_array().unwrap().iter().all(|s| s["passed"] == true));

    let open = gen(dir.path(), "no_summoning_unconstrained");
    let out = summon(&["check", s(&open)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(json(&out)["witness"].is_object());
}

#[test]
fn malformed_and_invalid_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"start\": [1,\n").unwrap();
    let out = summon(&["check", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    let g1 = gen(dir.path(), "g1");
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&g1).unwrap()).unwrap();
    doc["returns"] = Value::Array(vec![]);
    let invalid = dir.path().join("invalid.json");
    std::fs::write(&invalid, doc.to_string()).unwrap();
    let out = summon(&["validate", s(&invalid)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["valid"], false);

    assert_eq!(summon(&["check", "/nonexistent/task.json"]).status.code(), Some(2));
    assert_eq!(summon(&["gen", "nope"]).status.code(), Some(2));
    assert_eq!(summon(&["run", s(&g1)]).status.code(), Some(2));
}

#[test]
fn run_g1_exhaustively() {
    let dir = tempfile::tempdir().unwrap();
    let g1 = gen(dir.path(), "g1");
    let out = summon(&["run", s(&g1), "--exhaustive"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["mismatches"], 0);
    assert!(v["min_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    assert_eq!(v["audit_passed"], true);

    let alias = summon(&["exhaustive", s(&g1)]);
    assert_eq!(alias.stdout, out.stdout);
}

#[test]
fn quantum_mode_refuses_no_summoning() {
    let dir = tempfile::tempdir().unwrap();
    let g0 = gen(dir.path(), "no_summoning");
    let out = summon(&["run", s(&g0), "--exhaustive"]);
    assert_eq!(out.status.code(), Some(4));
    let kinds: Vec<String> = json(&out)["reasons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["kind"].as_str().unwrap().to_string())
        .collect();
    assert!(kinds.contains(&"constrained_inputs".into()));
    assert!(kinds.contains(&"empty_common_past".into()));

    let token = summon(&["run", s(&g0), "--exhaustive", "--classical", "token"]);
    assert_eq!(token.status.code(), Some(0));
    assert_eq!(json(&token)["mismatches"], 0);
}

#[test]
fn simulate_matches_quantum_table() {
    let dir = tempfile::tempdir().unwrap();
    let g1 = gen(dir.path(), "g1");
    let quantum = json(&summon(&["run", s(&g1), "--exhaustive"]));
    let out = summon(&["run", s(&g1), "--exhaustive", "--classical=simulate"]);
    assert_eq!(out.status.code(), Some(0));
    let sim = json(&out);
    assert_eq!(sim["disagreements"], 0);
    for (q, c) in quantum["rows"].as_array().unwrap().iter().zip(sim["rows"].as_array().unwrap()) {
        assert_eq!(q["assignment"], c["assignment"]);
        assert_eq!(c["classical_delivered_at"], Value::Array(vec![q["returned_at"].clone()]));
    }
}

#[test]
fn seeds_fix_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let t3 = gen(dir.path(), "t3");
    let a = summon(&["run", s(&t3), "--assignment", "1,2", "--seed", "17"]);
    let b = summon(&["run", s(&t3), "--assignment", "1,2", "--seed", "17"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_summon"))
        .args(["run", s(&t3), "--assignment", "1,2"])
        .env("SUMMON_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(env.stdout, a.stdout);

    let one = summon(&["run", s(&t3), "--exhaustive", "--jobs", "1"]);
    let many = summon(&["run", s(&t3), "--exhaustive", "--jobs", "3"]);
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let t3 = gen(dir.path(), "t3");
    let trace = dir.path().join("trace.jsonl");
    let out = summon(&["run", s(&t3), "--assignment", "0,1", "--trace", s(&trace)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut kinds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["seq"], i);
        assert!(v["point"]["t"].is_string());
        kinds.push(v["kind"].as_str().unwrap().to_string());
    }
    for k in ["prepare", "teleport", "broadcast", "reconstruct", "deliver"] {
        assert!(kinds.iter().any(|x| x == k), "no {k} event");
    }
}

#[test]
fn generation_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(summon(&["gen", "random_possible", "--seed", "7", "-o", s(p)]).status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    for name in SCENARIOS {
        let path = gen(dir.path(), name);
        let out = summon(&["validate", s(&path)]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert!(out.stderr.is_empty(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let t3 = gen(dir.path(), "t3");
    let v = json(&summon(&["check", s(&t3)]));
    assert_eq!(v["variant"]["returns"], "one_return");
    assert!(v["screens"].as_array().unwrap().iter().all(|s| s["passed"] == true));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&t3).unwrap()).unwrap();
    assert_eq!(doc["returns"].as_array().unwrap().len(), 3);
    assert!(doc["returns"][0]["t"].is_string(), "coordinates are rational strings");
}

#[test]
fn shipped_scenarios_match_generator() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["no_summoning", "hayden_may", "multi_call", "g1", "t3"] {
        let shipped = std::fs::read_to_string(root.join(format!("{name}.json"))).unwrap();
        let out = summon(&["gen", name]);
        assert_eq!(String::from_utf8_lossy(&out.stdout), shipped, "{name}");
    }
}

#[test]
fn human_tables() {
    let dir = tempfile::tempdir().unwrap();
    let g1 = gen(dir.path(), "g1");
    let out = summon(&["--human", "run", s(&g1), "--exhaustive"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("mismatches 0"));
    assert_eq!(summon(&["demo"]).status.code(), Some(0));
}

//! The `summon` command line.
//!
//! Exit codes: 0 success (or classically possible), 1 runtime failure or a
//! failed verification, 2 invalid input or usage, 3 classically impossible,
//! 4 quantum synthesis refused.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::classical_sim::{run_classical_token, simulate_classically, ClassicalToken};
use crate::feasibility::{classically_possible_with_budget, FeasibilityVerdict, DEFAULT_SEARCH_BUDGET};
use crate::protocol::{
    run, run_exhaustive, synthesize, ExhaustiveOptions, ProtocolPlan, RunOutcome, SynthesisError, SynthesisOptions,
    DEFAULT_EXHAUSTIVE_CAP, DEFAULT_SECRET_DIM, RUN_FIDELITY_TOLERANCE,
};
use crate::scenarios::{self, RandomParams};
use crate::task::{validate, Assignment, SummoningTask, TaskDocument};
use crate::trace::Trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IMPOSSIBLE: i32 = 3;
pub const EXIT_REFUSED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "summon", version, about = "Check, synthesize and simulate relativistic summoning tasks")]
pub struct Cli {
    /// Print tables instead of JSON.
    #[arg(long, global = true)]
    pub human: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a task file.
    Validate { file: PathBuf },
    /// Classify a task and decide classical possibility.
    Check {
        file: PathBuf,
        /// Node budget for the multiple-return selection search.
        #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
        budget: usize,
    },
    /// Synthesize a quantum protocol plan.
    Synth {
        file: PathBuf,
        /// Secret dimension.
        #[arg(long, default_value_t = DEFAULT_SECRET_DIM as u32, value_parser = clap::value_parser!(u32).range(2..=16))]
        dim: u32,
    },
    /// Run a protocol for one assignment or all of them.
    Run(RunArgs),
    /// Shorthand for `run --exhaustive`.
    Exhaustive {
        #[command(flatten)]
        common: CommonRunArgs,
    },
    /// Walk through the built-in scenarios.
    Demo {
        #[arg(long, env = "SUMMON_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Write a scenario task file.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassicalMode {
    /// Broadcast a copyable token and let each return point decide.
    Token,
    /// Replay the quantum plan's operations as classical messages.
    Simulate,
}

#[derive(Debug, Args)]
pub struct CommonRunArgs {
    pub file: PathBuf,
    #[arg(long, env = "SUMMON_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON-lines event trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub classical: Option<ClassicalMode>,
    /// Worker threads for exhaustive runs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SECRET_DIM as u32, value_parser = clap::value_parser!(u32).range(2..=16))]
    pub dim: u32,
    /// Largest input space to run exhaustively.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("which").required(true).args(["assignment", "exhaustive"]))]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonRunArgs,
    /// Comma-separated input values, e.g. `0,1`.
    #[arg(long, value_parser = parse_assignment, allow_hyphen_values = true)]
    pub assignment: Option<Assignment>,
    #[arg(long)]
    pub exhaustive: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// One of the built-in scenario names.
    pub scenario: String,
    #[arg(long, env = "SUMMON_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub max_inputs: usize,
    #[arg(long, default_value_t = 3)]
    pub max_cardinality: u32,
    #[arg(long, default_value_t = 3)]
    pub max_returns: usize,
    #[arg(long, default_value_t = 64)]
    pub max_space: usize,
}

fn parse_assignment(s: &str) -> Result<Assignment, String> {
    if s.trim().is_empty() {
        return Ok(Assignment(vec![]));
    }
    s.split(',')
        .map(|v| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Assignment)
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    human: bool,
}

impl Io<'_> {
    fn json<T: Serialize>(&mut self, value: &T) {
        let text = serde_json::to_string_pretty(value).expect("reports serialize");
        let _ = writeln!(self.out, "{text}");
    }

    fn line(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", text.as_ref());
    }

    fn error(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.err, "summon: {}", text.as_ref());
    }
}

/// Parses, validates and builds the task, reporting problems and returning
/// the exit code on failure.
fn load(io: &mut Io, path: &Path) -> Result<SummoningTask, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        io.error(format!("{}: {e}", path.display()));
        EXIT_INVALID
    })?;
    let doc = TaskDocument::from_json(&text).map_err(|e| {
        io.error(format!("{}: {e}", path.display()));
        EXIT_INVALID
    })?;
    let report = validate(&doc);
    if !report.valid {
        if io.human {
            io.line(format!("{}: invalid", path.display()));
            for v in &report.violations {
                io.line(format!("  {v}"));
            }
        } else {
            io.json(&report);
        }
        return Err(EXIT_INVALID);
    }
    SummoningTask::from_document(&doc).map_err(|e| {
        io.error(e.to_string());
        EXIT_INVALID
    })
}

pub fn run_cli(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut io = Io { out, err, human: cli.human };
    let result = match &cli.command {
        Command::Validate { file } => cmd_validate(&mut io, file),
        Command::Check { file, budget } => cmd_check(&mut io, file, *budget),
        Command::Synth { file, dim } => cmd_synth(&mut io, file, *dim as usize),
        Command::Run(args) => cmd_run(&mut io, &args.common, args.assignment.as_ref()),
        Command::Exhaustive { common } => cmd_run(&mut io, common, None),
        Command::Demo { seed } => cmd_demo(&mut io, *seed),
        Command::Gen(args) => cmd_gen(&mut io, args),
    };
    match result {
        Ok(code) | Err(code) => code,
    }
}

fn cmd_validate(io: &mut Io, file: &Path) -> Result<i32, i32> {
    let task = load(io, file)?;
    if io.human {
        io.line(format!("{}: valid", file.display()));
    } else {
        io.json(&json!({"valid": true, "violations": [], "assignments": task.space().size()}));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheckReport<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    task: Option<&'a str>,
    constrained: bool,
    #[serde(flatten)]
    verdict: &'a FeasibilityVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

fn cmd_check(io: &mut Io, file: &Path, budget: usize) -> Result<i32, i32> {
    let task = load(io, file)?;
    let verdict = classically_possible_with_budget(&task, budget).map_err(|e| {
        io.error(e.to_string());
        EXIT_FAILURE
    })?;
    let note = if task.is_constrained() {
        Some("constrained inputs: common-past screens are informational and no quantum protocol is synthesized")
    } else {
        None
    };
    if io.human {
        io.line(format!(
            "task: {}\nvariant: {:?} / {:?}\nclassically possible: {}",
            task.name().unwrap_or("-"),
            verdict.variant.returns,
            verdict.variant.inputs,
            verdict.possible
        ));
        for s in &verdict.screens {
            io.line(format!(
                "  screen {:?}: {}{}",
                s.screen,
                if s.passed { "pass" } else { "fail" },
                if s.informational { " (informational)" } else { "" }
            ));
        }
        if let Some(w) = &verdict.witness {
            io.line(format!("witness: {}", serde_json::to_string(w).expect("witness serializes")));
        }
        if let Some(n) = note {
            io.line(format!("note: {n}"));
        }
    } else {
        io.json(&CheckReport {
            task: task.name(),
            constrained: task.is_constrained(),
            verdict: &verdict,
            note,
        });
    }
    Ok(if verdict.possible { EXIT_OK } else { EXIT_IMPOSSIBLE })
}

fn synthesize_or_refuse(io: &mut Io, task: &SummoningTask, dim: usize) -> Result<ProtocolPlan, i32> {
    let options = SynthesisOptions {
        secret_dim: dim,
        ..SynthesisOptions::default()
    };
    synthesize(task, &options).map_err(|e| match e {
        SynthesisError::Refused(r) => {
            if io.human {
                io.line(format!("synthesis refused: {r}"));
            } else {
                io.json(&json!({"refused": true, "reasons": r.reasons}));
            }
            EXIT_REFUSED
        }
        other => {
            io.error(other.to_string());
            EXIT_FAILURE
        }
    })
}

fn cmd_synth(io: &mut Io, file: &Path, dim: usize) -> Result<i32, i32> {
    let task = load(io, file)?;
    let plan = synthesize_or_refuse(io, &task, dim)?;
    if io.human {
        io.line(format!(
            "plan: {} return point(s), {} route(s), sharing {}",
            plan.sites.len(),
            plan.routes.len(),
            plan.scheme.as_ref().map_or("none", |s| s.construction.as_str())
        ));
        for r in &plan.routes {
            let hops: Vec<String> = r.hops.iter().map(|h| format!("P{}", h.input + 1)).collect();
            io.line(format!("  pair ({},{}): P -> {}", r.pair.0 + 1, r.pair.1 + 1, hops.join(" -> ")));
        }
    } else {
        io.json(&plan);
    }
    Ok(EXIT_OK)
}

fn assignments_for(io: &mut Io, task: &SummoningTask, one: Option<&Assignment>, cap: usize) -> Result<Vec<Assignment>, i32> {
    match one {
        Some(m) => match task.space().rank(m.values()) {
            Some(r) if task.is_allowed(r) => Ok(vec![m.clone()]),
            Some(_) => {
                io.error(format!("assignment {m} is forbidden"));
                Err(EXIT_INVALID)
            }
            None => {
                io.error(format!("assignment {m} is outside the input space"));
                Err(EXIT_INVALID)
            }
        },
        None if task.space().size() > cap => {
            io.error(format!("input space has {} assignments, above --cap {cap}", task.space().size()));
            Err(EXIT_INVALID)
        }
        None => Ok(task.allowed_ranks().map(|r| task.space().unrank(r)).collect()),
    }
}

fn write_trace(io: &mut Io, path: Option<&PathBuf>, traces: &[&Trace]) -> Result<(), i32> {
    let Some(path) = path else { return Ok(()) };
    let mut merged = Trace::new();
    for t in traces {
        for e in t.events() {
            merged.push(&e.point, e.kind, e.data.clone());
        }
    }
    fs::write(path, merged.to_json_lines()).map_err(|e| {
        io.error(format!("{}: {e}", path.display()));
        EXIT_FAILURE
    })
}

fn cmd_run(io: &mut Io, args: &CommonRunArgs, one: Option<&Assignment>) -> Result<i32, i32> {
    let task = load(io, &args.file)?;
    match args.classical {
        Some(ClassicalMode::Token) => run_token(io, &task, one, args),
        Some(ClassicalMode::Simulate) => run_simulated(io, &task, one, args),
        None => run_quantum(io, &task, one, args),
    }
}

fn print_rows(io: &mut Io, rows: &[RunOutcome]) {
    io.line(format!("{:<16} {:>8} {:>8} {:>18} {:>6}", "assignment", "expected", "returned", "fidelity", "audit"));
    for r in rows {
        let idx = |q: Option<usize>| q.map_or("-".to_string(), |q| format!("Q{}", q + 1));
        io.line(format!(
            "{:<16} {:>8} {:>8} {:>18} {:>6}",
            r.assignment.to_string(),
            idx(r.expected),
            idx(r.returned_at),
            r.fidelity.map_or("-".to_string(), |f| format!("{f:.15}")),
            if r.audit_ok { "ok" } else { "FAIL" }
        ));
    }
}

fn run_quantum(io: &mut Io, task: &SummoningTask, one: Option<&Assignment>, args: &CommonRunArgs) -> Result<i32, i32> {
    let plan = synthesize_or_refuse(io, task, args.dim as usize)?;
    let runtime = |io: &mut Io, e: &dyn std::fmt::Display| {
        io.error(e.to_string());
        EXIT_FAILURE
    };
    if let Some(m) = one {
        assignments_for(io, task, Some(m), args.cap)?;
        let row = run(&plan, m, args.seed).map_err(|e| runtime(io, &e))?;
        write_trace(io, args.trace.as_ref(), &[&row.trace])?;
        let ok = row.returned_at == row.expected
            && row.audit_ok
            && row.fidelity.is_none_or(|f| f >= 1.0 - RUN_FIDELITY_TOLERANCE);
        if io.human {
            print_rows(io, std::slice::from_ref(&row));
        } else {
            io.json(&json!({"task": task.name(), "seed": args.seed, "run": row, "passed": ok}));
        }
        return Ok(if ok { EXIT_OK } else { EXIT_FAILURE });
    }
    let options = ExhaustiveOptions {
        jobs: args.jobs,
        cap: args.cap,
        keep_traces: args.trace.is_some(),
    };
    let report = run_exhaustive(task, &plan, args.seed, &options).map_err(|e| runtime(io, &e))?;
    let traces: Vec<&Trace> = report.rows.iter().map(|r| &r.trace).collect();
    write_trace(io, args.trace.as_ref(), &traces)?;
    if io.human {
        print_rows(io, &report.rows);
        io.line(format!(
            "runs {}  mismatches {}  min fidelity {}  audit {}",
            report.runs,
            report.mismatches,
            report.min_fidelity.map_or("-".into(), |f| format!("{f:.15}")),
            if report.audit_passed { "pass" } else { "FAIL" }
        ));
    } else {
        io.json(&report);
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct TokenRow {
    assignment: Assignment,
    #[serde(with = "crate::index::one_based_vec")]
    allowed: Vec<usize>,
    #[serde(with = "crate::index::one_based_vec")]
    delivered_at: Vec<usize>,
    audit_ok: bool,
}

fn run_token(io: &mut Io, task: &SummoningTask, one: Option<&Assignment>, args: &CommonRunArgs) -> Result<i32, i32> {
    let verdict = classically_possible_with_budget(task, DEFAULT_SEARCH_BUDGET).map_err(|e| {
        io.error(e.to_string());
        EXIT_FAILURE
    })?;
    if !verdict.possible {
        if io.human {
            io.line("task is not classically possible");
        } else {
            io.json(&json!({"possible": false, "witness": verdict.witness}));
        }
        return Ok(EXIT_IMPOSSIBLE);
    }
    let token = ClassicalToken(format!("token-{}", args.seed).into_bytes());
    let mut rows = Vec::new();
    for m in assignments_for(io, task, one, args.cap)? {
        let out = run_classical_token(task, &verdict.rules, &m, &token).map_err(|e| {
            io.error(e.to_string());
            EXIT_FAILURE
        })?;
        rows.push(TokenRow {
            allowed: task.image_of(&m).unwrap_or(&[]).to_vec(),
            assignment: m,
            delivered_at: out.delivered_at,
            audit_ok: out.audit_ok,
        });
    }
    let mismatches = rows
        .iter()
        .filter(|r| match r.delivered_at.as_slice() {
            [] => !r.allowed.is_empty(),
            [q] => !r.allowed.contains(q),
            _ => true,
        })
        .count();
    let audit = rows.iter().all(|r| r.audit_ok);
    if io.human {
        for r in &rows {
            io.line(format!("{:<16} delivered at {:?}", r.assignment.to_string(), r.delivered_at.iter().map(|q| q + 1).collect::<Vec<_>>()));
        }
        io.line(format!("mismatches {mismatches}  audit {}", if audit { "pass" } else { "FAIL" }));
    } else {
        io.json(&json!({"task": task.name(), "mode": "token", "rows": rows, "mismatches": mismatches, "audit_passed": audit}));
    }
    Ok(if mismatches == 0 && audit { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Serialize)]
struct SimulatedRow {
    assignment: Assignment,
    #[serde(with = "crate::index::one_based_opt")]
    quantum_returned_at: Option<usize>,
    #[serde(with = "crate::index::one_based_vec")]
    classical_delivered_at: Vec<usize>,
    agree: bool,
    audit_ok: bool,
}

fn run_simulated(io: &mut Io, task: &SummoningTask, one: Option<&Assignment>, args: &CommonRunArgs) -> Result<i32, i32> {
    let plan = synthesize_or_refuse(io, task, args.dim as usize)?;
    let mut rows = Vec::new();
    for m in assignments_for(io, task, one, args.cap)? {
        let quantum = run(&plan, &m, args.seed).map_err(|e| {
            io.error(e.to_string());
            EXIT_FAILURE
        })?;
        let classical = simulate_classically(&plan, &m).map_err(|e| {
            io.error(e.to_string());
            EXIT_FAILURE
        })?;
        let agree = classical.delivered_at == quantum.returned_at.into_iter().collect::<Vec<_>>();
        rows.push(SimulatedRow {
            assignment: m,
            quantum_returned_at: quantum.returned_at,
            classical_delivered_at: classical.delivered_at,
            agree,
            audit_ok: classical.audit_ok && quantum.audit_ok,
        });
    }
    let disagreements = rows.iter().filter(|r| !r.agree).count();
    let audit = rows.iter().all(|r| r.audit_ok);
    if io.human {
        for r in &rows {
            io.line(format!(
                "{:<16} quantum {:?} classical {:?}{}",
                r.assignment.to_string(),
                r.quantum_returned_at.map(|q| q + 1),
                r.classical_delivered_at.iter().map(|q| q + 1).collect::<Vec<_>>(),
                if r.agree { "" } else { "  DISAGREE" }
            ));
        }
        io.line(format!("disagreements {disagreements}  audit {}", if audit { "pass" } else { "FAIL" }));
    } else {
        io.json(&json!({"task": task.name(), "mode": "simulate", "seed": args.seed, "rows": rows, "disagreements": disagreements, "audit_passed": audit}));
    }
    Ok(if disagreements == 0 && audit { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_demo(io: &mut Io, seed: u64) -> Result<i32, i32> {
    let mut entries = Vec::new();
    let mut code = EXIT_OK;
    for name in ["no_summoning", "hayden_may", "g1", "t3", "multi_call"] {
        let task = scenarios::generate(name, seed, &RandomParams::default()).expect("built-in scenario");
        let verdict = classically_possible_with_budget(&task, DEFAULT_SEARCH_BUDGET).map_err(|e| {
            io.error(e.to_string());
            EXIT_FAILURE
        })?;
        let entry = match synthesize(&task, &SynthesisOptions::default()) {
            Err(SynthesisError::Refused(r)) => json!({
                "scenario": name,
                "classically_possible": verdict.possible,
                "constrained": task.is_constrained(),
                "quantum": {"refused": true, "reasons": r.reasons},
            }),
            Err(e) => {
                io.error(e.to_string());
                return Err(EXIT_FAILURE);
            }
            Ok(plan) => {
                let report = run_exhaustive(&task, &plan, seed, &ExhaustiveOptions::default()).map_err(|e| {
                    io.error(e.to_string());
                    EXIT_FAILURE
                })?;
                if !report.passed() {
                    code = EXIT_FAILURE;
                }
                json!({
                    "scenario": name,
                    "classically_possible": verdict.possible,
                    "constrained": task.is_constrained(),
                    "quantum": {
                        "refused": false,
                        "runs": report.runs,
                        "mismatches": report.mismatches,
                        "min_fidelity": report.min_fidelity,
                        "audit_passed": report.audit_passed,
                    },
                })
            }
        };
        entries.push(entry);
    }
    if io.human {
        for e in &entries {
            io.line(format!(
                "{:<14} classical {:<5} quantum {}",
                e["scenario"].as_str().unwrap_or("?"),
                e["classically_possible"],
                if e["quantum"]["refused"] == true {
                    "refused".to_string()
                } else {
                    format!("{} runs, {} mismatches", e["quantum"]["runs"], e["quantum"]["mismatches"])
                }
            ));
        }
    } else {
        io.json(&entries);
    }
    Ok(code)
}

fn cmd_gen(io: &mut Io, args: &GenArgs) -> Result<i32, i32> {
    let params = RandomParams {
        max_inputs: args.max_inputs,
        max_cardinality: args.max_cardinality,
        max_returns: args.max_returns,
        max_space: args.max_space,
    };
    let task = scenarios::generate(&args.scenario, args.seed, &params).map_err(|e| {
        io.error(e.to_string());
        EXIT_INVALID
    })?;
    let text = task.to_json_pretty();
    match &args.output {
        Some(path) => fs::write(path, text + "\n").map_err(|e| {
            io.error(format!("{}: {e}", path.display()));
            EXIT_FAILURE
        })?,
        None => io.line(text),
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_parse() {
        assert_eq!(parse_assignment("0, 2,1").unwrap(), Assignment(vec![0, 2, 1]));
        assert_eq!(parse_assignment("").unwrap(), Assignment(vec![]));
        assert!(parse_assignment("0,x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

use std::collections::BTreeMap;

use summoning::classical_sim::{extract_deterministic_trace, run_classical_token, simulate_classically, ClassicalToken};
use summoning::feasibility::classically_possible;
use summoning::protocol::{
    run, run_exhaustive, synthesize, ExhaustiveOptions, ProtocolError, RefusalReason, SynthesisError,
    SynthesisOptions,
};
use summoning::routing::DeliveryPolicy;
use summoning::scenarios::{self, random_possible, random_possible_multiple, RandomParams};
use summoning::spacetime::SpacetimePoint;
use summoning::{Assignment, SummoningTask};

/// Returned site and per-pair destinations of one run.
type Observed = (Option<usize>, Vec<Option<usize>>);

fn plan(task: &SummoningTask) -> summoning::ProtocolPlan {
    synthesize(task, &SynthesisOptions::default()).unwrap()
}

#[test]
fn canonical_tasks_deliver_everywhere() {
    for task in [scenarios::g1(), scenarios::t3(), scenarios::multi_call()] {
        let p = plan(&task);
        let report = run_exhaustive(&task, &p, 5, &ExhaustiveOptions::default()).unwrap();
        assert!(report.passed(), "{}: {report:?}", task.name().unwrap());
        assert_eq!(report.runs, task.allowed_ranks().count());
        for row in &report.rows {
            let rank = task.space().rank(row.assignment.values()).unwrap();
            match row.returned_at {
                Some(q) => assert!(task.image(rank).contains(&q)),
                None => assert!(task.image(rank).is_empty()),
            }
        }
    }
}

#[test]
fn g1_routes_through_both_inputs() {
    let p = plan(&scenarios::g1());
    assert_eq!(p.routes.len(), 1);
    let hops: Vec<usize> = p.routes[0].hops.iter().map(|h| h.input).collect();
    assert_eq!(hops, vec![0, 1]);
    assert_eq!(p.scheme.as_ref().unwrap().construction, "direct");
    let t3 = plan(&scenarios::t3());
    assert_eq!(t3.routes.len(), 3);
    assert_eq!(t3.scheme.as_ref().unwrap().construction, "threshold-2-of-3");
}

#[test]
fn refusals_name_their_reasons() {
    let refused = |task: &SummoningTask| match synthesize(task, &SynthesisOptions::default()) {
        Err(SynthesisError::Refused(r)) => r.reasons,
        other => panic!("expected a refusal, got {other:?}"),
    };
    let g0 = refused(&scenarios::no_summoning());
    assert!(g0.iter().any(|r| matches!(r, RefusalReason::ConstrainedInputs { .. })));
    assert!(g0.iter().any(|r| matches!(r, RefusalReason::EmptyCommonPast { pairs } if pairs.contains(&(0, 1)))));

    let hm = refused(&scenarios::hayden_may());
    assert!(hm.iter().any(|r| matches!(r, RefusalReason::ConstrainedInputs { .. })));

    let open = refused(&scenarios::no_summoning_unconstrained());
    assert!(open.iter().any(|r| matches!(r, RefusalReason::NotClassicallyPossible { .. })));
}

#[test]
fn delivery_does_not_depend_on_outcomes() {
    for task in [scenarios::g1(), scenarios::t3(), scenarios::multi_call()] {
        let p = plan(&task);
        let mut table: BTreeMap<Vec<u32>, Observed> = BTreeMap::new();
        for seed in 0..10 {
            for m in task.space().iter() {
                let out = run(&p, &m, seed).unwrap();
                let dests: Vec<Option<usize>> = out.deliveries.iter().map(|d| d.destination).collect();
                let entry = table.entry(m.0.clone()).or_insert((out.returned_at, dests.clone()));
                assert_eq!(*entry, (out.returned_at, dests), "seed {seed} {m}");
            }
        }
    }
}

#[test]
fn outcome_conditioned_delivery_is_caught() {
    let task = scenarios::g1();
    let mut p = plan(&task);
    p.routes[0].policy = DeliveryPolicy::OutcomeConditioned { hop: 0 };
    let mut bad = 0;
    for seed in 0..10 {
        match run_exhaustive(&task, &p, seed, &ExhaustiveOptions::default()) {
            Ok(r) if r.passed() => {}
            _ => bad += 1,
        }
    }
    assert!(bad > 0, "outcome-dependent routing went unnoticed");
}

#[test]
fn tampered_hop_violates_causality() {
    let task = scenarios::g1();
    let mut p = plan(&task);
    p.routes[0].hops[0].point = SpacetimePoint::exact(5, &[-1], 1);
    let err = run(&p, &Assignment(vec![0, 1]), 0).unwrap_err();
    assert!(matches!(err, ProtocolError::Causality(_)), "{err:?}");
}

#[test]
fn alice_never_sees_the_reference() {
    // two different secrets from two seeds give identical delivery tables
    let task = scenarios::t3();
    let p = plan(&task);
    let a = run_exhaustive(&task, &p, 1, &ExhaustiveOptions::default()).unwrap();
    let b = run_exhaustive(&task, &p, 2, &ExhaustiveOptions::default()).unwrap();
    let sites = |r: &summoning::protocol::ExhaustiveReport| r.rows.iter().map(|x| x.returned_at).collect::<Vec<_>>();
    assert_eq!(sites(&a), sites(&b));
}

#[test]
fn random_tasks_end_to_end() {
    let params = RandomParams::default();
    for seed in 0..8 {
        for task in [random_possible(seed, &params), random_possible_multiple(seed, &params)] {
            let p = plan(&task);
            let report = run_exhaustive(&task, &p, seed, &ExhaustiveOptions::default()).unwrap();
            assert!(report.passed(), "seed {seed}: {}", task.to_json_pretty());
            for row in &report.rows {
                let classical = simulate_classically(&p, &row.assignment).unwrap();
                assert!(classical.audit_ok);
                assert_eq!(classical.delivered_at, row.returned_at.into_iter().collect::<Vec<_>>());
            }
        }
    }
}

#[test]
fn reports_are_independent_of_thread_count() {
    let task = random_possible(3, &RandomParams::default());
    let p = plan(&task);
    let one = run_exhaustive(&task, &p, 9, &ExhaustiveOptions { jobs: Some(1), ..Default::default() }).unwrap();
    let four = run_exhaustive(&task, &p, 9, &ExhaustiveOptions { jobs: Some(4), ..Default::default() }).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
}

#[test]
fn token_broadcast_serves_constrained_tasks() {
    for task in [scenarios::no_summoning(), scenarios::hayden_may(), scenarios::g1()] {
        let v = classically_possible(&task).unwrap();
        let token = ClassicalToken(b"opaque".to_vec());
        for rank in task.allowed_ranks() {
            let m = task.space().unrank(rank);
            let out = run_classical_token(&task, &v.rules, &m, &token).unwrap();
            assert!(out.audit_ok);
            match task.image(rank) {
                [] => assert!(out.delivered_at.is_empty()),
                img => {
                    assert_eq!(out.delivered_at.len(), 1);
                    assert!(img.contains(&out.delivered_at[0]));
                }
            }
        }
    }
}

#[test]
fn extracted_trace_depends_only_on_inputs() {
    let p = plan(&scenarios::t3());
    for m in p.task.space().iter() {
        let ops = extract_deterministic_trace(&p, &m).unwrap();
        assert_eq!(ops, extract_deterministic_trace(&p, &m).unwrap());
        let text = serde_json::to_string(&ops).unwrap();
        assert!(!text.contains("\"a\":") && !text.contains("\"b\":"), "concrete outcomes leaked: {text}");
    }
}

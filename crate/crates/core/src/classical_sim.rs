//! Classical summoning and the classical replay of quantum plans.
//!
//! A classical token can be copied, so it is broadcast from the start point
//! and each return point decides locally whether to hand over a copy.
//!
//! A synthesized quantum plan decides where it returns from the inputs
//! alone: Bell outcomes only affect Pauli corrections. Its operations can
//! therefore be written down classically with symbolic outcomes, broadcast,
//! and used by an agent at each return point to work out whether the quantum
//! protocol would have returned there.

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::broadcast::{emit_inputs, BroadcastError, CausalityViolation, MessageKey, MessageStore, Payload};
use crate::feasibility::{Decision, LocalDecisionRule};
use crate::protocol::ProtocolPlan;
use crate::routing::DeliveryPolicy;
use crate::spacetime::SpacetimePoint;
use crate::task::{Assignment, SummoningTask};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ClassicalToken(pub Vec<u8>);

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error(transparent)]
    Causality(#[from] CausalityViolation),
    #[error(transparent)]
    Broadcast(BroadcastError),
    #[error("rule at return point {} has no entry for {restriction:?}", .site + 1)]
    RuleGap { site: usize, restriction: Vec<u32> },
    #[error("assignment {0:?} is not an allowed assignment of the task")]
    BadAssignment(Vec<u32>),
    #[error("delivery at pair {pair:?} depends on measurement outcomes")]
    NotDeterministic { pair: (usize, usize) },
    #[error("agent at return point {} disagrees with the extracted operation log", .site + 1)]
    Inconsistent { site: usize },
}

impl From<BroadcastError> for ClassicalError {
    fn from(e: BroadcastError) -> Self {
        match e {
            BroadcastError::Causality(c) => ClassicalError::Causality(c),
            other => ClassicalError::Broadcast(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalOutcome {
    pub assignment: Assignment,
    /// Return points (0-based, task numbering) that delivered a copy.
    #[serde(with = "crate::index::one_based_vec")]
    pub delivered_at: Vec<usize>,
    pub audit_ok: bool,
}

fn check_assignment(task: &SummoningTask, m: &Assignment) -> Result<(), ClassicalError> {
    match task.space().rank(m.values()) {
        Some(r) if task.is_allowed(r) => Ok(()),
        _ => Err(ClassicalError::BadAssignment(m.0.clone())),
    }
}

/// Broadcasts `token` from the start point; each return point applies its
/// rule to the inputs it can see and delivers a copy when the rule fires.
pub fn run_classical_token(
    task: &SummoningTask,
    rules: &[LocalDecisionRule],
    assignment: &Assignment,
    token: &ClassicalToken,
) -> Result<ClassicalOutcome, ClassicalError> {
    check_assignment(task, assignment)?;
    let mut store = MessageStore::new(task.causal_order());
    emit_inputs(&mut store, task, assignment)?;
    store.emit(task.start(), MessageKey::Token, Payload::Bytes(token.0.clone()))?;
    let mut delivered_at = Vec::new();
    for rule in rules {
        let here = task.return_point(rule.return_index);
        let restriction = store.read_inputs(here, &rule.inputs)?;
        let decision = rule.decide(&restriction).ok_or(ClassicalError::RuleGap {
            site: rule.return_index,
            restriction,
        })?;
        if decision == Decision::Return {
            let copy = match store.read(here, &MessageKey::Token)? {
                Payload::Bytes(b) => ClassicalToken(b.clone()),
                _ => unreachable!("token is stored as bytes"),
            };
            debug_assert_eq!(&copy, token);
            delivered_at.push(rule.return_index);
        }
    }
    Ok(ClassicalOutcome {
        assignment: assignment.clone(),
        delivered_at,
        audit_ok: store.audit_passed(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    ApplyUnitary,
    PrepareState,
    Measure,
    Broadcast,
    Deliver,
}

/// Classical description of one operation of a quantum plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperationDescriptor {
    pub site: SpacetimePoint,
    pub kind: OperationKind,
    pub params: Value,
    /// Messages the operation needs; each must be emitted in the site's past.
    pub dependencies: Vec<MessageKey>,
}

fn pair_json(p: (usize, usize)) -> Value {
    json!([p.0 + 1, p.1 + 1])
}

fn input_keys(inputs: &[usize]) -> Vec<MessageKey> {
    inputs.iter().map(|&k| MessageKey::Input { input: k }).collect()
}

/// Lists every operation the plan performs under `assignment`, with Bell
/// outcomes left symbolic. Fails when any delivery decision would depend on
/// an outcome.
pub fn extract_deterministic_trace(
    plan: &ProtocolPlan,
    assignment: &Assignment,
) -> Result<Vec<OperationDescriptor>, ClassicalError> {
    check_assignment(&plan.task, assignment)?;
    let mut ops = Vec::new();
    let start = plan.task.start().clone();
    let mut push = |site: &SpacetimePoint, kind, params: Value, dependencies: Vec<MessageKey>| {
        ops.push(OperationDescriptor {
            site: site.clone(),
            kind,
            params,
            dependencies,
        })
    };

    match &plan.scheme {
        None => push(&start, OperationKind::PrepareState, json!({"op": "secret", "dim": plan.secret_dim}), vec![]),
        Some(s) => push(&start, OperationKind::PrepareState, json!({"op": "encode", "scheme": s}), vec![]),
    }

    for route in &plan.routes {
        if let DeliveryPolicy::OutcomeConditioned { .. } = route.policy {
            return Err(ClassicalError::NotDeterministic { pair: route.pair });
        }
        let depth = route.hops.len();
        let mut histories: Vec<Vec<u32>> = vec![vec![]];
        push(&start, OperationKind::Measure, json!({"op": "teleport", "pair": pair_json(route.pair), "hop": 0, "onto": Vec::<u32>::new()}), vec![]);
        push(&start, OperationKind::Broadcast, json!({"op": "outcome", "pair": pair_json(route.pair), "hop": 0, "history": Vec::<u32>::new()}), vec![]);
        for l in 1..=depth {
            let hop = &route.hops[l - 1];
            let local = assignment.values()[hop.input];
            let dep = vec![MessageKey::Input { input: hop.input }];
            let extended: Vec<Vec<u32>> = histories
                .iter()
                .map(|h| {
                    let mut e = h.clone();
                    e.push(local);
                    e
                })
                .collect();
            if l < depth {
                for e in &extended {
                    push(&hop.point, OperationKind::Measure, json!({"op": "teleport", "pair": pair_json(route.pair), "hop": l, "onto": e}), dep.clone());
                    push(&hop.point, OperationKind::Broadcast, json!({"op": "outcome", "pair": pair_json(route.pair), "hop": l, "history": e}), dep.clone());
                }
                histories = extended;
            } else {
                let forwarded: Vec<Value> = extended
                    .iter()
                    .map(|e| {
                        let to = route.rule.destination(e).flatten();
                        json!({"label": e, "to": to.map(|q| q + 1)})
                    })
                    .collect();
                push(&hop.point, OperationKind::Deliver, json!({"op": "forward", "pair": pair_json(route.pair), "forwarded": forwarded}), dep);
            }
        }
        let label = assignment.restrict(&route.rule.inputs);
        if let Some(q) = route.rule.destination(&label).flatten() {
            push(
                route.target_point(q),
                OperationKind::ApplyUnitary,
                json!({"op": "correct", "pair": pair_json(route.pair), "label": label, "corrections": depth}),
                input_keys(&route.rule.inputs),
            );
        }
    }

    for site in &plan.sites {
        let restriction = assignment.restrict(&site.rule.inputs);
        let decision = site.rule.decide(&restriction).ok_or(ClassicalError::RuleGap {
            site: site.return_index,
            restriction,
        })?;
        if decision == Decision::Return {
            let deps = input_keys(&site.rule.inputs);
            if !site.star.is_empty() {
                let star: Vec<Value> = site.star.iter().map(|&p| pair_json(p)).collect();
                push(&site.point, OperationKind::ApplyUnitary, json!({"op": "reconstruct", "return": site.return_index + 1, "star": star}), deps.clone());
            }
            push(&site.point, OperationKind::Deliver, json!({"op": "return", "return": site.return_index + 1}), deps);
        }
    }
    Ok(ops)
}

/// Replays the extracted operations as broadcast classical messages. The
/// agent at each return point uses only descriptors and inputs from its past
/// light cone to decide whether the quantum plan returns there, and delivers
/// a token copy if so. Delivery sites are in the original task's numbering.
pub fn simulate_classically(plan: &ProtocolPlan, assignment: &Assignment) -> Result<ClassicalOutcome, ClassicalError> {
    let ops = extract_deterministic_trace(plan, assignment)?;
    let task = &plan.task;
    let mut store = MessageStore::new(task.causal_order());
    emit_inputs(&mut store, task, assignment)?;
    for (seq, op) in ops.iter().enumerate() {
        for dep in &op.dependencies {
            store.read(&op.site, dep)?;
        }
        let record = serde_json::to_value(op).expect("descriptors serialize");
        store.emit(&op.site, MessageKey::Descriptor { seq }, Payload::Record(record))?;
    }

    let mut delivered_at = Vec::new();
    for site in &plan.sites {
        let visible = store.visible(&site.point)?;
        let inputs: Vec<Option<u32>> = (0..task.num_inputs())
            .map(|k| {
                visible.iter().find_map(|m| match (&m.key, &m.payload) {
                    (MessageKey::Input { input }, Payload::Value(v)) if *input == k => Some(*v),
                    _ => None,
                })
            })
            .collect();
        let restriction: Vec<u32> = site
            .rule
            .inputs
            .iter()
            .map(|&k| inputs[k].expect("past inputs of a return point are visible there"))
            .collect();
        let fires = site.rule.decide(&restriction).ok_or(ClassicalError::RuleGap {
            site: site.return_index,
            restriction,
        })? == Decision::Return;

        // Every share of the star must have been forwarded here.
        let star_complete = site.star.iter().all(|&pair| {
            visible.iter().any(|m| {
                let Payload::Record(r) = &m.payload else { return false };
                if r["params"]["op"] != "forward" || r["params"]["pair"] != pair_json(pair) {
                    return false;
                }
                let route = plan.routes.iter().find(|r| r.pair == pair).expect("route per star pair");
                let label: Vec<u32> = route
                    .rule
                    .inputs
                    .iter()
                    .map(|&k| inputs[k].expect("common past inputs are visible"))
                    .collect();
                r["params"]["forwarded"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .any(|f| f["label"] == json!(label) && f["to"] == json!(site.return_index + 1))
            })
        });
        let would_return = fires && star_complete;

        let logged = visible.iter().any(|m| {
            matches!(&m.payload, Payload::Record(r)
                if r["kind"] == "deliver" && r["params"]["op"] == "return"
                    && r["params"]["return"] == json!(site.return_index + 1))
        });
        if would_return != logged {
            return Err(ClassicalError::Inconsistent { site: site.return_index });
        }
        if would_return {
            delivered_at.push(plan.original_returns[site.return_index]);
        }
    }
    Ok(ClassicalOutcome {
        assignment: assignment.clone(),
        delivered_at,
        audit_ok: store.audit_passed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::classically_possible;
    use crate::protocol::{synthesize, SynthesisOptions};
    use crate::scenarios;

    #[test]
    fn token_follows_the_call() {
        let t = scenarios::no_summoning();
        let v = classically_possible(&t).unwrap();
        let token = ClassicalToken(b"state".to_vec());
        let out = run_classical_token(&t, &v.rules, &Assignment(vec![1, 0]), &token).unwrap();
        assert_eq!(out.delivered_at, vec![0]);
        assert!(out.audit_ok);
        assert!(run_classical_token(&t, &v.rules, &Assignment(vec![1, 1]), &token).is_err());
    }

    #[test]
    fn g1_trace_has_teleports_and_one_return() {
        let plan = synthesize(&scenarios::g1(), &SynthesisOptions::default()).unwrap();
        let ops = extract_deterministic_trace(&plan, &Assignment(vec![0, 0])).unwrap();
        let teleport_sites: Vec<&SpacetimePoint> = ops
            .iter()
            .filter(|o| o.kind == OperationKind::Measure)
            .map(|o| &o.site)
            .collect();
        assert_eq!(teleport_sites, vec![plan.task.start(), plan.task.input_point(0)]);
        let returns: Vec<&OperationDescriptor> = ops
            .iter()
            .filter(|o| o.kind == OperationKind::Deliver && o.params["op"] == "return")
            .collect();
        assert_eq!(returns.len(), 1);
        assert_eq!(&returns[0].site, plan.task.return_point(0));
    }

    #[test]
    fn g1_classical_replay_matches_map() {
        let t = scenarios::g1();
        let plan = synthesize(&t, &SynthesisOptions::default()).unwrap();
        for m in t.space().iter() {
            let out = simulate_classically(&plan, &m).unwrap();
            assert_eq!(out.delivered_at, t.image_of(&m).unwrap().to_vec());
            assert!(out.audit_ok);
        }
    }

    #[test]
    fn outcome_conditioned_plans_are_rejected() {
        let mut plan = synthesize(&scenarios::g1(), &SynthesisOptions::default()).unwrap();
        plan.routes[0].policy = DeliveryPolicy::OutcomeConditioned { hop: 0 };
        assert!(matches!(
            extract_deterministic_trace(&plan, &Assignment(vec![0, 0])),
            Err(ClassicalError::NotDeterministic { pair: (0, 1) })
        ));
    }
}

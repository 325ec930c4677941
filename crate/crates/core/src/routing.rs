//! Routing one share of a return-point pair `(Q_i, Q_j)` through the input
//! points of their common past `S_ij`.
//!
//! The share starts at `P` and is teleported along the chain
//! `P → P_{k_1} → … → P_{k_L}` (members of `S_ij` in ascending index order).
//! Between member `l` and `l+1` sits a bank of pre-shared pairs labelled by
//! the input history `(m_{k_1}, …, m_{k_l})`. Member `l` never needs to know
//! the history: it teleports every incoming half labelled `h` onto the pair
//! labelled `h ++ [m_{k_l}]`, so only the half whose label matches the real
//! inputs carries the share. The last member forwards each half to `Q_i` or
//! `Q_j` according to the exclusion rule evaluated on its full label, or
//! keeps it when both points are excluded.
//!
//! No correction is applied along the way. The agent at the receiving point
//! reads the inputs to learn which half is live, reads the Bell outcomes of
//! that half's chain, and undoes them in reverse order. All reads go through
//! the audited [`MessageStore`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::broadcast::{BroadcastError, CausalityViolation, MessageKey, MessageStore, Payload};
use crate::feasibility::{Decision, LocalDecisionRule};
use crate::qudit_sim::{BellOutcome, QuantumSystem, RegisterId, SimError};
use crate::spacetime::SpacetimePoint;
use crate::task::{Assignment, AssignmentSpace, SummoningTask, DEFAULT_ASSIGNMENT_CAP};
use crate::trace::{EventKind, Trace};

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("return points {} and {} have no common past input point", .0.0 + 1, .0.1 + 1)]
    EmptyCommonPast((usize, usize)),
    #[error("exclusion rule for pair {:?} has no entry for restriction {restriction:?}", (.pair.0 + 1, .pair.1 + 1))]
    RuleGap { pair: (usize, usize), restriction: Vec<u32> },
    #[error("restriction {restriction:?} excludes neither point of pair {:?}", (.pair.0 + 1, .pair.1 + 1))]
    NoExclusion { pair: (usize, usize), restriction: Vec<u32> },
    #[error("exclusion rule is for pair {:?}, inputs {:?}; expected pair {:?}, inputs {:?}", .rule.0, .rule.1, .expected.0, .expected.1)]
    RuleMismatch {
        rule: ((usize, usize), Vec<usize>),
        expected: ((usize, usize), Vec<usize>),
    },
    #[error("share has no registers")]
    EmptyShare,
    #[error(transparent)]
    Causality(#[from] CausalityViolation),
    #[error(transparent)]
    Broadcast(BroadcastError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<BroadcastError> for RoutingError {
    fn from(e: BroadcastError) -> Self {
        match e {
            BroadcastError::Causality(c) => RoutingError::Causality(c),
            other => RoutingError::Broadcast(other),
        }
    }
}

/// Which points of a pair a restriction of the inputs rules out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// `Q_i` is never designated; the share goes to `Q_j`.
    First,
    /// `Q_j` is never designated; the share goes to `Q_i`.
    Second,
    /// Neither is designated; the share stays at the last hop.
    Both,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExclusionEntry {
    pub restriction: Vec<u32>,
    pub excludes: Exclusion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExclusionRule {
    #[serde(with = "crate::index::one_based_pair")]
    pub pair: (usize, usize),
    #[serde(with = "crate::index::one_based_vec")]
    pub inputs: Vec<usize>,
    /// Sorted by restriction.
    pub table: Vec<ExclusionEntry>,
}

impl ExclusionRule {
    pub fn lookup(&self, restriction: &[u32]) -> Option<Exclusion> {
        self.table
            .binary_search_by(|e| e.restriction.as_slice().cmp(restriction))
            .ok()
            .map(|i| self.table[i].excludes)
    }

    /// Where the share goes: `Some(Some(q))` for return point `q`, `Some(None)` to retain.
    pub fn destination(&self, restriction: &[u32]) -> Option<Option<usize>> {
        self.lookup(restriction).map(|e| match e {
            Exclusion::First => Some(self.pair.1),
            Exclusion::Second => Some(self.pair.0),
            Exclusion::Both => None,
        })
    }
}

/// Builds the exclusion rule of pair `(i, j)` from the local decision rules.
pub fn derive_exclusion_rule(
    task: &SummoningTask,
    rules: &[LocalDecisionRule],
    i: usize,
    j: usize,
) -> Result<ExclusionRule, RoutingError> {
    let inputs = task.causal().common_past(i, j);
    if inputs.is_empty() {
        return Err(RoutingError::EmptyCommonPast((i, j)));
    }
    let space = task.space();
    // restriction -> (i designated somewhere, j designated somewhere)
    let mut seen: BTreeMap<Vec<u32>, (bool, bool)> = BTreeMap::new();
    for rank in task.allowed_ranks() {
        let m = space.unrank(rank);
        let fires = |q: usize| rules[q].decide_for(&m) == Some(Decision::Return);
        let e = seen.entry(m.restrict(&inputs)).or_default();
        e.0 |= fires(i);
        e.1 |= fires(j);
    }
    let table = seen
        .into_iter()
        .map(|(restriction, designates)| {
            let excludes = match designates {
                (false, false) => Exclusion::Both,
                (false, true) => Exclusion::First,
                (true, false) => Exclusion::Second,
                (true, true) => {
                    return Err(RoutingError::NoExclusion { pair: (i, j), restriction });
                }
            };
            Ok(ExclusionEntry { restriction, excludes })
        })
        .collect::<Result<_, _>>()?;
    Ok(ExclusionRule { pair: (i, j), inputs, table })
}

/// How the last hop picks a destination for each half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeliveryPolicy {
    /// Destination from the exclusion rule on the half's label.
    InputDetermined,
    /// Destination from the Bell outcome the half saw at hop `hop`. Breaks
    /// outcome independence; exists to exercise the determinism checks.
    OutcomeConditioned { hop: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hop {
    #[serde(with = "crate::index::one_based")]
    pub input: usize,
    pub point: SpacetimePoint,
    pub cardinality: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoutingPlan {
    #[serde(with = "crate::index::one_based_pair")]
    pub pair: (usize, usize),
    pub start: SpacetimePoint,
    /// Members of `S_ij`, ascending by input index.
    pub hops: Vec<Hop>,
    /// `Q_i` and `Q_j`.
    pub targets: [SpacetimePoint; 2],
    pub rule: ExclusionRule,
    pub policy: DeliveryPolicy,
}

impl RoutingPlan {
    /// Point where the teleportation onto link `l` happens (`P` for `l = 0`).
    pub fn hop_point(&self, l: usize) -> &SpacetimePoint {
        if l == 0 {
            &self.start
        } else {
            &self.hops[l - 1].point
        }
    }

    pub fn last_hop(&self) -> &SpacetimePoint {
        self.hop_point(self.hops.len())
    }

    /// Pairs on link `l`: one for `l = 0`, else one per history of the first `l` hops.
    pub fn bank_size(&self, l: usize) -> usize {
        self.hops[..l].iter().map(|h| h.cardinality as usize).product()
    }

    pub fn target_point(&self, q: usize) -> &SpacetimePoint {
        if q == self.pair.0 {
            &self.targets[0]
        } else {
            &self.targets[1]
        }
    }

    fn histories(&self, l: usize) -> impl Iterator<Item = Vec<u32>> {
        let radices: Vec<u32> = self.hops[..l].iter().map(|h| h.cardinality).collect();
        let space = AssignmentSpace::new(&radices, DEFAULT_ASSIGNMENT_CAP).expect("histories fit in the task's space");
        (0..space.size()).map(move |r| space.unrank(r).0)
    }
}

pub fn plan_pair_route(
    task: &SummoningTask,
    i: usize,
    j: usize,
    rule: ExclusionRule,
) -> Result<RoutingPlan, RoutingError> {
    let inputs = task.causal().common_past(i, j);
    if inputs.is_empty() {
        return Err(RoutingError::EmptyCommonPast((i, j)));
    }
    if rule.pair != (i, j) || rule.inputs != inputs {
        return Err(RoutingError::RuleMismatch {
            rule: (rule.pair, rule.inputs.clone()),
            expected: ((i, j), inputs),
        });
    }
    let radices: Vec<u32> = inputs.iter().map(|&k| task.cardinalities()[k]).collect();
    let space = AssignmentSpace::new(&radices, DEFAULT_ASSIGNMENT_CAP).expect("sub-space of a valid task");
    for r in space.iter() {
        if rule.lookup(&r.0).is_none() {
            return Err(RoutingError::RuleGap { pair: (i, j), restriction: r.0 });
        }
    }
    Ok(RoutingPlan {
        pair: (i, j),
        start: task.start().clone(),
        hops: inputs
            .iter()
            .map(|&k| Hop {
                input: k,
                point: task.input_point(k).clone(),
                cardinality: task.cardinalities()[k],
            })
            .collect(),
        targets: [task.return_point(i).clone(), task.return_point(j).clone()],
        rule,
        policy: DeliveryPolicy::InputDetermined,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeliveryRecord {
    #[serde(with = "crate::index::one_based_pair")]
    pub pair: (usize, usize),
    /// The inputs on `S_ij`, i.e. the label of the live half.
    pub label: Vec<u32>,
    #[serde(with = "crate::index::one_based_opt")]
    pub destination: Option<usize>,
    /// Registers holding the corrected share at the destination, or the
    /// uncorrected halves at the last hop when retained.
    #[serde(skip)]
    pub registers: Vec<RegisterId>,
    pub teleports: usize,
}

fn outcome_key(pair: (usize, usize), slot: usize, hop: usize, history: &[u32]) -> MessageKey {
    MessageKey::TeleportOutcome {
        pair,
        slot,
        hop,
        history: history.to_vec(),
    }
}

/// Runs the route for one share. Inputs must already be in `store`.
pub fn execute_pair_route<R: Rng + ?Sized>(
    plan: &RoutingPlan,
    share: &[RegisterId],
    assignment: &Assignment,
    sys: &mut QuantumSystem,
    store: &mut MessageStore,
    rng: &mut R,
    trace: &mut Trace,
) -> Result<DeliveryRecord, RoutingError> {
    if share.is_empty() {
        return Err(RoutingError::EmptyShare);
    }
    let depth = plan.hops.len();
    let label = assignment.restrict(&plan.rule.inputs);
    let mut teleports = 0;
    let mut registers = Vec::with_capacity(share.len());
    let mut destination = None;

    for (slot, &reg) in share.iter().enumerate() {
        let d = sys.dim(reg)?;
        // Pre-shared pairs per link, keyed by history label.
        let mut banks: Vec<BTreeMap<Vec<u32>, (RegisterId, RegisterId)>> = Vec::with_capacity(depth);
        for l in 0..depth {
            let mut bank = BTreeMap::new();
            for h in plan.histories(l) {
                bank.insert(h, sys.add_bell_pair(d)?);
            }
            trace.push(
                plan.hop_point(l),
                EventKind::Prepare,
                json!({"pair": [plan.pair.0 + 1, plan.pair.1 + 1], "slot": slot, "link": l, "bell_pairs": bank.len(), "dim": d}),
            );
            banks.push(bank);
        }

        // Halves arriving at the next hop, keyed by label.
        let mut incoming: BTreeMap<Vec<u32>, RegisterId> = BTreeMap::new();
        let (near, far) = banks[0][&Vec::new()];
        let o = sys.teleport(reg, near, rng)?;
        teleports += 1;
        emit_outcome(store, trace, plan, slot, 0, &[], o)?;
        incoming.insert(Vec::new(), far);

        for (l, hop) in (1..).zip(&plan.hops) {
            let here = hop.point.clone();
            let local = store.read_value(&here, &MessageKey::Input { input: hop.input })?;
            if l < depth {
                let mut next = BTreeMap::new();
                for (hist, half) in incoming {
                    let mut extended = hist.clone();
                    extended.push(local);
                    let (near, far) = banks[l][&extended];
                    let o = sys.teleport(half, near, rng)?;
                    teleports += 1;
                    emit_outcome(store, trace, plan, slot, l, &extended, o)?;
                    next.insert(extended, far);
                }
                incoming = next;
            } else {
                let mut forwarded = Vec::new();
                let mut live = None;
                for (hist, half) in incoming.iter() {
                    let mut full = hist.clone();
                    full.push(local);
                    let to = match plan.policy {
                        DeliveryPolicy::InputDetermined => plan
                            .rule
                            .destination(&full)
                            .ok_or_else(|| RoutingError::RuleGap { pair: plan.pair, restriction: full.clone() })?,
                        DeliveryPolicy::OutcomeConditioned { hop } => {
                            let h = hop.min(depth - 1);
                            let key = outcome_key(plan.pair, slot, h, &full[..h]);
                            let o = store.read_outcome(&here, &key)?;
                            Some(if o.a == 0 { plan.pair.0 } else { plan.pair.1 })
                        }
                    };
                    forwarded.push(json!({"label": full, "to": to.map(|q| q + 1)}));
                    if full == label {
                        live = Some((*half, to));
                    }
                }
                trace.push(
                    &here,
                    EventKind::Deliver,
                    json!({"pair": [plan.pair.0 + 1, plan.pair.1 + 1], "slot": slot, "forwarded": forwarded}),
                );
                let (half, to) = live.expect("live label is among the forwarded halves");
                destination = to;
                match to {
                    None => registers.push(half),
                    Some(q) => registers.push(receive(plan, store, trace, slot, half, q, sys)?),
                }
            }
        }
    }
    Ok(DeliveryRecord {
        pair: plan.pair,
        label,
        destination,
        registers,
        teleports,
    })
}

fn emit_outcome(
    store: &mut MessageStore,
    trace: &mut Trace,
    plan: &RoutingPlan,
    slot: usize,
    hop: usize,
    history: &[u32],
    o: BellOutcome,
) -> Result<(), RoutingError> {
    let at = plan.hop_point(hop);
    let key = outcome_key(plan.pair, slot, hop, history);
    trace.push(
        at,
        EventKind::Teleport,
        json!({"pair": [plan.pair.0 + 1, plan.pair.1 + 1], "slot": slot, "hop": hop, "history": history}),
    );
    let seq = store.emit(at, key, Payload::Outcome(o))?;
    trace.push(
        at,
        EventKind::Broadcast,
        json!({"message": seq, "pair": [plan.pair.0 + 1, plan.pair.1 + 1], "slot": slot, "hop": hop, "history": history, "a": o.a, "b": o.b}),
    );
    Ok(())
}

/// The agent at return point `q` identifies the live half from the inputs
/// and undoes its chain of Pauli frames.
fn receive(
    plan: &RoutingPlan,
    store: &mut MessageStore,
    trace: &mut Trace,
    slot: usize,
    half: RegisterId,
    q: usize,
    sys: &mut QuantumSystem,
) -> Result<RegisterId, RoutingError> {
    let at = plan.target_point(q).clone();
    let last = plan.last_hop();
    if !store.order().precedes(last, &at).map_err(BroadcastError::from)? {
        let what = format!("share half of pair {:?}", (plan.pair.0 + 1, plan.pair.1 + 1));
        return Err(CausalityViolation::new(what, last.clone(), at).into());
    }
    let label = store.read_inputs(&at, &plan.rule.inputs)?;
    let mut outcomes = Vec::with_capacity(plan.hops.len());
    for hop in 0..plan.hops.len() {
        outcomes.push(store.read_outcome(&at, &outcome_key(plan.pair, slot, hop, &label[..hop]))?);
    }
    for o in outcomes.iter().rev() {
        sys.apply_correction(half, *o)?;
    }
    trace.push(
        &at,
        EventKind::Deliver,
        json!({"pair": [plan.pair.0 + 1, plan.pair.1 + 1], "slot": slot, "label": label, "corrections": outcomes.len()}),
    );
    Ok(half)
}

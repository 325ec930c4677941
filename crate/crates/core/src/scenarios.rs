//! Built-in scenarios and seeded random task generators.
//!
//! Fixed scenarios use exact rational coordinates so lightlike relations are
//! decided exactly. Random generators are deterministic functions of their
//! seed.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::feasibility;
use crate::spacetime::SpacetimePoint;
use crate::task::{InputPoint, SummoningTask, TaskError};

/// Names accepted by [`generate`].
pub const SCENARIOS: &[&str] = &[
    "no_summoning",
    "no_summoning_unconstrained",
    "hayden_may",
    "multi_call",
    "g1",
    "t3",
    "random_possible",
];

fn pt(t: i64, x: i64) -> SpacetimePoint {
    SpacetimePoint::exact(t, &[x], 1)
}

fn input(p: SpacetimePoint, cardinality: u32) -> InputPoint {
    InputPoint { point: p, cardinality }
}

/// Two spacelike-separated calls, each only in the past of its own return.
fn g0_geometry() -> (SpacetimePoint, Vec<InputPoint>, Vec<SpacetimePoint>) {
    (
        pt(0, 0),
        vec![input(pt(1, -1), 2), input(pt(1, 1), 2)],
        vec![
            SpacetimePoint::exact(3, &[-2], 2),
            SpacetimePoint::exact(3, &[2], 2),
        ],
    )
}

/// Exactly one of two spacelike calls is made; the state must come back at
/// the called point.
pub fn no_summoning() -> SummoningTask {
    let (start, inputs, returns) = g0_geometry();
    SummoningTask::from_fn(start, inputs, returns, &[vec![0, 0], vec![1, 1]], |m| match m {
        [1, 0] => vec![0],
        [0, 1] => vec![1],
        _ => vec![],
    })
    .expect("built-in scenario is valid")
    .with_name("no_summoning")
}

/// The no-summoning geometry with all four call patterns allowed.
pub fn no_summoning_unconstrained() -> SummoningTask {
    let (start, inputs, returns) = g0_geometry();
    SummoningTask::from_fn(start, inputs, returns, &[], |m| match m {
        [1, 0] | [1, 1] => vec![0],
        [0, 1] => vec![1],
        _ => vec![],
    })
    .expect("built-in scenario is valid")
    .with_name("no_summoning_unconstrained")
}

/// Both inputs precede both returns; `Q_1` when `m_1 ⊕ m_2 = 0`, else `Q_2`.
pub fn g1() -> SummoningTask {
    SummoningTask::from_fn(
        pt(0, 0),
        vec![input(pt(1, -1), 2), input(pt(1, 1), 2)],
        vec![pt(3, -1), pt(3, 1)],
        &[],
        |m| vec![((m[0] ^ m[1]) & 1) as usize],
    )
    .expect("built-in scenario is valid")
    .with_name("g1")
}

/// Three returns sharing the full input set as common past; the return is
/// `Q_{(m_1 + m_2) mod 3 + 1}`.
pub fn t3() -> SummoningTask {
    SummoningTask::from_fn(
        pt(0, 0),
        vec![input(pt(1, -1), 2), input(pt(1, 1), 3)],
        vec![pt(4, -1), pt(4, 0), pt(4, 1)],
        &[],
        |m| vec![((m[0] + m[1]) % 3) as usize],
    )
    .expect("built-in scenario is valid")
    .with_name("t3")
}

fn three_call_geometry() -> (SpacetimePoint, Vec<InputPoint>, Vec<SpacetimePoint>) {
    (
        pt(0, 0),
        vec![input(pt(1, -1), 2), input(pt(1, 0), 2), input(pt(1, 1), 2)],
        vec![pt(3, -1), pt(3, 0), pt(3, 1)],
    )
}

/// Three call points, all in the past of every return point; exactly one
/// call is made and the state must come back at the matching return.
pub fn hayden_may() -> SummoningTask {
    let (start, inputs, returns) = three_call_geometry();
    let forbidden: Vec<Vec<u32>> = crate::task::AssignmentSpace::new(&[2, 2, 2], 8)
        .expect("tiny space")
        .iter()
        .map(|a| a.0)
        .filter(|m| m.iter().sum::<u32>() != 1)
        .collect();
    SummoningTask::from_fn(start, inputs, returns, &forbidden, |m| {
        if m.iter().sum::<u32>() == 1 {
            vec![m.iter().position(|&v| v == 1).unwrap()]
        } else {
            vec![]
        }
    })
    .expect("built-in scenario is valid")
    .with_name("hayden_may")
}

/// Any number of calls; the state may come back at any called point.
pub fn multi_call() -> SummoningTask {
    let (start, inputs, returns) = three_call_geometry();
    SummoningTask::from_fn(start, inputs, returns, &[], |m| {
        m.iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i)
            .collect()
    })
    .expect("built-in scenario is valid")
    .with_name("multi_call")
}

/// Bounds for random tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub max_inputs: usize,
    pub max_cardinality: u32,
    pub max_returns: usize,
    /// Upper bound on `∏ n_i`.
    pub max_space: usize,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            max_inputs: 4,
            max_cardinality: 3,
            max_returns: 3,
            max_space: 64,
        }
    }
}

/// How the return map of a random task is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFamily {
    /// Every assignment independently picks one return or nothing.
    Uniform,
    /// A decision tree that only tests inputs in the common past of the
    /// returns still reachable below each node. Always classically possible
    /// when every return lies in the future of the start point.
    Tree,
    /// A `Tree` map whose non-empty images are widened into random supersets.
    WidenedTree,
    /// Every assignment independently picks a random subset of returns.
    UniformSubsets,
}

type ReturnMap = Box<dyn FnMut(&[u32]) -> Vec<usize>>;

struct Geometry {
    start: SpacetimePoint,
    inputs: Vec<InputPoint>,
    returns: Vec<SpacetimePoint>,
}

fn random_geometry<R: Rng>(rng: &mut R, params: &RandomParams, reachable_returns: bool) -> Geometry {
    let num_returns = rng.random_range(1..=params.max_returns.max(1));
    let mut cards = Vec::new();
    let mut size = 1usize;
    let target_inputs = rng.random_range(0..=params.max_inputs);
    for _ in 0..target_inputs {
        let c = rng.random_range(2..=params.max_cardinality.max(2));
        if size * c as usize > params.max_space {
            break;
        }
        size *= c as usize;
        cards.push(c);
    }
    // Coordinates in halves: inputs at t ∈ [0, 2], returns at t ∈ [1, 4].
    let inputs = cards
        .into_iter()
        .map(|c| {
            let t = rng.random_range(0..=4);
            let x = rng.random_range(-4..=4);
            input(SpacetimePoint::exact(t, &[x], 2), c)
        })
        .collect();
    let returns = (0..num_returns)
        .map(|_| {
            let t = rng.random_range(2..=8);
            let span = if reachable_returns { t.min(4) } else { 4 };
            let x = rng.random_range(-span..=span);
            SpacetimePoint::exact(t, &[x], 2)
        })
        .collect();
    Geometry {
        start: pt(0, 0),
        inputs,
        returns,
    }
}

enum TreeNode {
    Leaf(Option<usize>),
    Split { input: usize, children: Vec<TreeNode> },
}

impl TreeNode {
    fn eval(&self, m: &[u32]) -> Option<usize> {
        match self {
            TreeNode::Leaf(r) => *r,
            TreeNode::Split { input, children } => children[m[*input] as usize].eval(m),
        }
    }
}

fn build_tree<R: Rng>(
    rng: &mut R,
    task_past: &[Vec<usize>],
    cards: &[u32],
    candidates: Vec<usize>,
    tested: &mut Vec<usize>,
) -> TreeNode {
    let common: Vec<usize> = (0..cards.len())
        .filter(|k| !tested.contains(k))
        .filter(|k| candidates.iter().all(|&j| task_past[j].contains(k)))
        .collect();
    let stop = candidates.len() <= 1 && rng.random_bool(0.5);
    if common.is_empty() || stop || rng.random_bool(0.15) {
        let leaf = if rng.random_bool(0.2) {
            None
        } else {
            candidates.choose(rng).copied()
        };
        return TreeNode::Leaf(leaf);
    }
    let k = *common.choose(rng).unwrap();
    tested.push(k);
    let children = (0..cards[k])
        .map(|_| {
            let mut sub: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.7))
                .collect();
            if sub.is_empty() {
                sub.push(*candidates.choose(rng).unwrap());
            }
            build_tree(rng, task_past, cards, sub, tested)
        })
        .collect();
    tested.pop();
    TreeNode::Split { input: k, children }
}

/// Draws one unconstrained task; `None` when the draw is not a valid task
/// (for example a return point that is never designated).
pub fn random_task<R: Rng>(rng: &mut R, params: &RandomParams, family: MapFamily) -> Option<SummoningTask> {
    let reachable = !matches!(family, MapFamily::Uniform | MapFamily::UniformSubsets);
    let geo = random_geometry(rng, params, reachable);
    let cards: Vec<u32> = geo.inputs.iter().map(|i| i.cardinality).collect();
    let n = geo.returns.len();
    let map: ReturnMap = match family {
        MapFamily::Uniform => {
            let mut r = ChaCha8Rng::seed_from_u64(rng.random());
            Box::new(move |_| {
                if r.random_bool(0.2) {
                    vec![]
                } else {
                    vec![r.random_range(0..n)]
                }
            })
        }
        MapFamily::UniformSubsets => {
            let mut r = ChaCha8Rng::seed_from_u64(rng.random());
            Box::new(move |_| (0..n).filter(|_| r.random_bool(0.5)).collect())
        }
        MapFamily::Tree | MapFamily::WidenedTree => {
            let probe = SummoningTask::from_fn(
                geo.start.clone(),
                geo.inputs.clone(),
                geo.returns.clone(),
                &[],
                |_| (0..n).collect(),
            )
            .ok()?;
            let past: Vec<Vec<usize>> = (0..n).map(|j| probe.causal().past_inputs(j).to_vec()).collect();
            let tree = build_tree(rng, &past, &cards, (0..n).collect(), &mut Vec::new());
            let widen = family == MapFamily::WidenedTree;
            let mut r = ChaCha8Rng::seed_from_u64(rng.random());
            Box::new(move |m| match tree.eval(m) {
                None => vec![],
                Some(j) if widen => {
                    let mut img: Vec<usize> = (0..n).filter(|&o| o == j || r.random_bool(0.4)).collect();
                    img.sort_unstable();
                    img
                }
                Some(j) => vec![j],
            })
        }
    };
    SummoningTask::from_fn(geo.start, geo.inputs, geo.returns, &[], map).ok()
}

/// Same as [`random_task`], then forbids a random proper subset of the
/// assignments (possibly none).
pub fn random_constrained_task<R: Rng>(
    rng: &mut R,
    params: &RandomParams,
    family: MapFamily,
) -> Option<SummoningTask> {
    let task = random_task(rng, params, family)?;
    let mut doc = task.to_document();
    let size = task.space().size();
    if size < 2 {
        return Some(task);
    }
    doc.forbidden = task
        .space()
        .iter()
        .filter(|_| rng.random_bool(0.3))
        .map(|a| a.0)
        .collect();
    if doc.forbidden.len() == size {
        doc.forbidden.pop();
    }
    SummoningTask::from_document(&doc).ok()
}

/// Rejection-samples unconstrained at-most-one tasks until one is
/// classically possible.
pub fn random_possible(seed: u64, params: &RandomParams) -> SummoningTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let family = if rng.random_bool(0.7) {
            MapFamily::Tree
        } else {
            MapFamily::Uniform
        };
        let Some(task) = random_task(&mut rng, params, family) else {
            continue;
        };
        if task.variant().is_multiple() {
            continue;
        }
        if matches!(feasibility::classically_possible(&task), Ok(v) if v.possible) {
            return task.with_name(format!("random_possible_{seed}"));
        }
    }
}

/// Rejection-samples classically possible multiple-return tasks.
pub fn random_possible_multiple(seed: u64, params: &RandomParams) -> SummoningTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let family = if rng.random_bool(0.8) {
            MapFamily::WidenedTree
        } else {
            MapFamily::UniformSubsets
        };
        let Some(task) = random_task(&mut rng, params, family) else {
            continue;
        };
        if !task.variant().is_multiple() {
            continue;
        }
        if matches!(feasibility::classically_possible(&task), Ok(v) if v.possible) {
            return task.with_name(format!("random_possible_multiple_{seed}"));
        }
    }
}

/// Looks up a scenario by name. `seed` and `params` only affect random ones.
pub fn generate(name: &str, seed: u64, params: &RandomParams) -> Result<SummoningTask, TaskError> {
    Ok(match name {
        "no_summoning" => no_summoning(),
        "no_summoning_unconstrained" => no_summoning_unconstrained(),
        "hayden_may" => hayden_may(),
        "multi_call" => multi_call(),
        "g1" => g1(),
        "t3" => t3(),
        "random_possible" => random_possible(seed, params),
        "random_possible_multiple" => random_possible_multiple(seed, params),
        other => {
            return Err(TaskError::Other(format!(
                "unknown scenario {other:?}; known: {}",
                SCENARIOS.join(", ")
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{validate, ReturnVariant};

    #[test]
    fn built_ins_validate() {
        for name in SCENARIOS {
            let t = generate(name, 7, &RandomParams::default()).unwrap();
            assert!(validate(&t.to_document()).valid, "{name}");
        }
    }

    #[test]
    fn random_generation_is_seed_deterministic() {
        let a = random_possible(7, &RandomParams::default()).to_json_pretty();
        let b = random_possible(7, &RandomParams::default()).to_json_pretty();
        assert_eq!(a, b);
    }

    #[test]
    fn multi_call_is_multiple() {
        assert_eq!(multi_call().variant().returns, ReturnVariant::Multiple);
    }

    #[test]
    fn tree_maps_are_possible_when_reachable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 40 {
            if let Some(t) = random_task(&mut rng, &RandomParams::default(), MapFamily::Tree) {
                let v = feasibility::classically_possible(&t).unwrap();
                assert!(v.possible, "{}", t.to_json_pretty());
                checked += 1;
            }
        }
    }
}

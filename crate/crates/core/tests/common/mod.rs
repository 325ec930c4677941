//! Test helpers shared by the integration targets.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use summoning::scenarios::{random_constrained_task, random_task, MapFamily, RandomParams};
use summoning::spacetime::causally_precedes;
use summoning::SummoningTask;

/// Decides classical possibility by searching joint local rule tables.
///
/// Each return point gets a table from the values of the inputs in its own
/// past (recomputed here from the raw points) to fire/silent. Tables are
/// filled entry by entry and a branch is cut as soon as some allowed
/// assignment has every entry it reads fixed and is served wrongly, or has
/// two points already firing. No code from the feasibility module is used.
pub fn brute_force_possible(task: &SummoningTask) -> bool {
    let n = task.num_returns();
    let cards = task.cardinalities();
    let past: Vec<Vec<usize>> = (0..n)
        .map(|j| {
            (0..task.num_inputs())
                .filter(|&k| causally_precedes(task.input_point(k), task.return_point(j)).unwrap())
                .collect()
        })
        .collect();
    let reachable: Vec<bool> = (0..n)
        .map(|j| causally_precedes(task.start(), task.return_point(j)).unwrap())
        .collect();
    let key = |j: usize, m: &[u32]| past[j].iter().fold(0usize, |acc, &k| acc * cards[k] as usize + m[k] as usize);
    let table_size = |j: usize| past[j].iter().map(|&k| cards[k] as usize).product::<usize>();

    // Variable ids: offset[j] + key.
    let mut offset = vec![0usize; n + 1];
    for j in 0..n {
        offset[j + 1] = offset[j] + table_size(j);
    }
    struct Constraint {
        vars: Vec<(usize, usize)>,
        image: Vec<usize>,
    }
    let constraints: Vec<Constraint> = task
        .allowed_ranks()
        .map(|r| {
            let m = task.space().unrank(r);
            Constraint {
                vars: (0..n).map(|j| (j, offset[j] + key(j, m.values()))).collect(),
                image: task.image(r).to_vec(),
            }
        })
        .collect();
    let mut touching = vec![Vec::new(); offset[n]];
    let mut order = Vec::new();
    let mut seen = vec![false; offset[n]];
    for (c, con) in constraints.iter().enumerate() {
        for &(_, v) in &con.vars {
            touching[v].push(c);
            if !seen[v] {
                seen[v] = true;
                order.push(v);
            }
        }
    }
    let ok = |c: &Constraint, values: &[Option<bool>]| {
        let mut fired = 0;
        let mut open = false;
        for &(j, v) in &c.vars {
            match values[v] {
                Some(true) => {
                    if c.image.is_empty() || !c.image.contains(&j) || !reachable[j] {
                        return false;
                    }
                    fired += 1;
                }
                Some(false) => {}
                None => open = true,
            }
        }
        fired <= 1 && (open || fired == c.image.len().min(1))
    };
    fn dfs(
        pos: usize,
        order: &[usize],
        values: &mut Vec<Option<bool>>,
        touching: &[Vec<usize>],
        check: &dyn Fn(usize, &[Option<bool>]) -> bool,
    ) -> bool {
        let Some(&v) = order.get(pos) else { return true };
        for choice in [false, true] {
            values[v] = Some(choice);
            if touching[v].iter().all(|&c| check(c, values)) && dfs(pos + 1, order, values, touching, check) {
                return true;
            }
        }
        values[v] = None;
        false
    }
    let mut values = vec![None; offset[n]];
    let check = |c: usize, values: &[Option<bool>]| ok(&constraints[c], values);
    dfs(0, &order, &mut values, &touching, &check)
}

/// Seeded corpus of small tasks mixing every map family, with and without
/// forbidden assignments.
pub fn small_corpus(count: usize, seed: u64) -> Vec<SummoningTask> {
    let params = RandomParams {
        max_inputs: 4,
        max_cardinality: 3,
        max_returns: 3,
        max_space: 16,
    };
    let families = [MapFamily::Tree, MapFamily::Uniform, MapFamily::WidenedTree, MapFamily::UniformSubsets];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut i = 0usize;
    while out.len() < count {
        let family = families[i % families.len()];
        let task = if i % 3 == 2 {
            random_constrained_task(&mut rng, &params, family)
        } else {
            random_task(&mut rng, &params, family)
        };
        i += 1;
        if let Some(t) = task {
            out.push(t);
        }
    }
    out
}

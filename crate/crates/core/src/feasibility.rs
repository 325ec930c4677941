//! Classical possibility of summoning tasks.
//!
//! A copyable token can be summoned exactly when every return point can
//! decide on its own, from the inputs in its causal past, whether it is the
//! point that returns. Concretely the indicator `[f(m) = j]` of a selection
//! `f(m) ∈ Q(m)` must factor through `m|S_j`, and the token must be able to
//! reach `Q_j` from the start point. For one-return and at-most-one maps the
//! selection is forced; for multiple-return maps it is found by a
//! backtracking search.
//!
//! The three screens (returns in the future of the start point, non-empty
//! common pasts, pairwise exclusion on common pasts) are necessary
//! conditions for unconstrained at-most-one tasks and are reported next to
//! the verdict.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::task::{Assignment, SummoningTask, TaskError, Variant};

/// Search nodes explored before the multiple-return search gives up.
pub const DEFAULT_SEARCH_BUDGET: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error("{0}")]
    ScreenUndefined(String),
    #[error("selection search exceeded its budget of {0} nodes")]
    SearchBudgetExceeded(usize),
    #[error("task is not classically possible")]
    NotPossible,
    #[error(transparent)]
    Task(#[from] TaskError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Return,
    Silent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleEntry {
    pub restriction: Vec<u32>,
    pub decision: Decision,
}

/// What the agent at one return point does, as a function of the inputs in
/// that point's causal past.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalDecisionRule {
    #[serde(with = "crate::index::one_based")]
    pub return_index: usize,
    /// The past input set `S_j`, ascending.
    #[serde(with = "crate::index::one_based_vec")]
    pub inputs: Vec<usize>,
    /// Sorted by restriction; covers every restriction an allowed assignment realises.
    pub table: Vec<RuleEntry>,
}

impl LocalDecisionRule {
    pub fn decide(&self, restriction: &[u32]) -> Option<Decision> {
        self.table
            .binary_search_by(|e| e.restriction.as_slice().cmp(restriction))
            .ok()
            .map(|i| self.table[i].decision)
    }

    pub fn decide_for(&self, assignment: &Assignment) -> Option<Decision> {
        self.decide(&assignment.restrict(&self.inputs))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Screen {
    /// Every return point lies in the causal future of the start point.
    ReturnsInFuture,
    /// Every pair of return points has a non-empty common past input set.
    CommonPastsNonEmpty,
    /// Inputs on each common past exclude at least one point of the pair.
    PairwiseExclusion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScreenWitness {
    ReturnsOutsideFuture {
        #[serde(with = "crate::index::one_based_vec")]
        returns: Vec<usize>,
    },
    EmptyCommonPasts {
        #[serde(serialize_with = "crate::index::one_based_pairs::serialize")]
        pairs: Vec<(usize, usize)>,
    },
    AmbiguousRestriction {
        #[serde(with = "crate::index::one_based_pair")]
        pair: (usize, usize),
        #[serde(with = "crate::index::one_based_vec")]
        inputs: Vec<usize>,
        restriction: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScreenResult {
    pub screen: Screen,
    pub passed: bool,
    /// Set when the screen is not a necessary condition for this task's variant.
    pub informational: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<ScreenWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A return point the token can never reach.
    ReturnOutsideFuture {
        #[serde(with = "crate::index::one_based")]
        return_index: usize,
    },
    /// Two allowed assignments agree on `S_j` but disagree on whether `Q_j` returns.
    NonLocalIndicator {
        #[serde(with = "crate::index::one_based")]
        return_index: usize,
        #[serde(with = "crate::index::one_based_vec")]
        past_inputs: Vec<usize>,
        first: Assignment,
        second: Assignment,
    },
    /// No consistent selection covers this assignment.
    NoConsistentSelection { assignment: Assignment },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub possible: bool,
    pub variant: Variant,
    pub rules: Vec<LocalDecisionRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub screens: Vec<ScreenResult>,
    /// Rules were replayed against every allowed assignment.
    pub verified: bool,
    /// Selected return per assignment rank (`None` for forbidden or empty rows).
    #[serde(skip)]
    pub selection: Vec<Option<usize>>,
}

/// Every return point must lie in the causal future of the start point.
pub fn check_returns_in_future(task: &SummoningTask) -> ScreenResult {
    let failing: Vec<usize> = (0..task.num_returns())
        .filter(|&j| !task.causal().start_precedes(j))
        .collect();
    ScreenResult {
        screen: Screen::ReturnsInFuture,
        passed: failing.is_empty(),
        informational: false,
        witness: (!failing.is_empty()).then_some(ScreenWitness::ReturnsOutsideFuture { returns: failing }),
    }
}

/// Every pair of return points must share a past input point.
pub fn check_common_pasts(task: &SummoningTask) -> ScreenResult {
    let n = task.num_returns();
    let mut empty = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if task.causal().common_past(i, j).is_empty() {
                empty.push((i, j));
            }
        }
    }
    ScreenResult {
        screen: Screen::CommonPastsNonEmpty,
        passed: empty.is_empty(),
        informational: false,
        witness: (!empty.is_empty()).then_some(ScreenWitness::EmptyCommonPasts { pairs: empty }),
    }
}

/// For each pair, no restriction of the inputs to the common past may be
/// consistent with both points being designated. Only defined for
/// unconstrained tasks with at most one return point.
pub fn check_pairwise_exclusion(task: &SummoningTask) -> Result<ScreenResult, FeasibilityError> {
    let variant = task.variant();
    if !variant.is_unconstrained() {
        return Err(FeasibilityError::ScreenUndefined(
            "pairwise exclusion is only defined for unconstrained inputs".into(),
        ));
    }
    if variant.is_multiple() {
        return Err(FeasibilityError::ScreenUndefined(
            "pairwise exclusion is only defined for at-most-one tasks; determinize first".into(),
        ));
    }
    let n = task.num_returns();
    let space = task.space();
    for i in 0..n {
        for j in i + 1..n {
            let common = task.causal().common_past(i, j);
            // restriction -> (designates i, designates j)
            let mut seen: HashMap<Vec<u32>, (bool, bool)> = HashMap::new();
            for rank in 0..space.size() {
                let image = task.image(rank);
                let (di, dj) = (image == [i], image == [j]);
                if !di && !dj {
                    continue;
                }
                let r = space.unrank(rank).restrict(&common);
                let e = seen.entry(r).or_default();
                e.0 |= di;
                e.1 |= dj;
            }
            let mut ambiguous: Vec<&Vec<u32>> = seen
                .iter()
                .filter(|(_, &(a, b))| a && b)
                .map(|(r, _)| r)
                .collect();
            ambiguous.sort();
            if let Some(r) = ambiguous.first() {
                return Ok(ScreenResult {
                    screen: Screen::PairwiseExclusion,
                    passed: false,
                    informational: false,
                    witness: Some(ScreenWitness::AmbiguousRestriction {
                        pair: (i, j),
                        inputs: common,
                        restriction: (*r).clone(),
                    }),
                });
            }
        }
    }
    Ok(ScreenResult {
        screen: Screen::PairwiseExclusion,
        passed: true,
        informational: false,
        witness: None,
    })
}

fn screens_for(task: &SummoningTask, variant: Variant) -> Vec<ScreenResult> {
    let mut first = check_returns_in_future(task);
    first.informational = variant.is_multiple();
    let mut second = check_common_pasts(task);
    second.informational = variant.is_multiple() || !variant.is_unconstrained();
    let mut out = vec![first, second];
    if let Ok(third) = check_pairwise_exclusion(task) {
        out.push(third);
    }
    out
}

pub fn classically_possible(task: &SummoningTask) -> Result<FeasibilityVerdict, FeasibilityError> {
    classically_possible_with_budget(task, DEFAULT_SEARCH_BUDGET)
}

pub fn classically_possible_with_budget(
    task: &SummoningTask,
    budget: usize,
) -> Result<FeasibilityVerdict, FeasibilityError> {
    let variant = task.variant();
    let screens = screens_for(task, variant);
    let outcome = if variant.is_multiple() {
        search_selection(task, budget)?
    } else {
        forced_selection(task)
    };
    let mut verdict = FeasibilityVerdict {
        possible: false,
        variant,
        rules: Vec::new(),
        witness: None,
        screens,
        verified: false,
        selection: Vec::new(),
    };
    match outcome {
        Err(w) => verdict.witness = Some(w),
        Ok(selection) => {
            let rules = rules_from_selection(task, &selection);
            verdict.verified = replay_rules(task, &rules);
            debug_assert!(verdict.verified, "selection rules failed replay");
            verdict.possible = verdict.verified;
            verdict.rules = rules;
            verdict.selection = selection;
        }
    }
    Ok(verdict)
}

/// One-return and at-most-one maps: the selection is `Q(m)` itself.
fn forced_selection(task: &SummoningTask) -> Result<Vec<Option<usize>>, Witness> {
    for j in 0..task.num_returns() {
        if !task.causal().start_precedes(j) {
            return Err(Witness::ReturnOutsideFuture { return_index: j });
        }
    }
    let space = task.space();
    for j in 0..task.num_returns() {
        let past = task.causal().past_inputs(j);
        let mut classes: HashMap<Vec<u32>, (bool, usize)> = HashMap::new();
        for rank in task.allowed_ranks() {
            let m = space.unrank(rank);
            let fires = task.image(rank).contains(&j);
            match classes.get(&m.restrict(past)) {
                Some(&(seen, first)) if seen != fires => {
                    return Err(Witness::NonLocalIndicator {
                        return_index: j,
                        past_inputs: past.to_vec(),
                        first: space.unrank(first),
                        second: m,
                    });
                }
                Some(_) => {}
                None => {
                    classes.insert(m.restrict(past), (fires, rank));
                }
            }
        }
    }
    Ok((0..space.size())
        .map(|r| {
            if task.is_allowed(r) {
                task.image(r).first().copied()
            } else {
                None
            }
        })
        .collect())
}

struct Row {
    rank: usize,
    /// Variable index per return point.
    vars: Vec<usize>,
    candidates: Vec<usize>,
}

struct SelectionSearch {
    rows: Vec<Row>,
    budget: usize,
    nodes: usize,
    deepest: (usize, usize),
}

impl SelectionSearch {
    /// Unit propagation; returns the index of a violated row on conflict.
    fn propagate(&self, vars: &mut [Option<bool>]) -> Result<(), usize> {
        loop {
            let mut changed = false;
            for (idx, row) in self.rows.iter().enumerate() {
                if row.candidates.is_empty() {
                    continue;
                }
                let mut on = 0;
                let mut open = Vec::new();
                for &j in &row.candidates {
                    match vars[row.vars[j]] {
                        Some(true) => on += 1,
                        Some(false) => {}
                        None => open.push(row.vars[j]),
                    }
                }
                if on > 1 || (on == 0 && open.is_empty()) {
                    return Err(idx);
                }
                if on == 1 && !open.is_empty() {
                    for v in open {
                        vars[v] = Some(false);
                    }
                    changed = true;
                } else if on == 0 && open.len() == 1 {
                    vars[open[0]] = Some(true);
                    changed = true;
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn solve(&mut self, mut vars: Vec<Option<bool>>, depth: usize) -> Result<Option<Vec<Option<bool>>>, FeasibilityError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(FeasibilityError::SearchBudgetExceeded(self.budget));
        }
        if let Err(row) = self.propagate(&mut vars) {
            if depth >= self.deepest.0 {
                self.deepest = (depth, row);
            }
            return Ok(None);
        }
        // Rows are in lexicographic assignment order; branch on the first open one.
        let open_row = self.rows.iter().find(|row| {
            !row.candidates.is_empty() && !row.candidates.iter().any(|&j| vars[row.vars[j]] == Some(true))
        });
        let Some(row) = open_row else {
            return Ok(Some(vars));
        };
        let choices: Vec<usize> = row
            .candidates
            .iter()
            .map(|&j| row.vars[j])
            .filter(|&v| vars[v].is_none())
            .collect();
        for v in choices {
            let mut next = vars.clone();
            next[v] = Some(true);
            if let Some(found) = self.solve(next, depth + 1)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }
}

/// Multiple-return maps: backtracking over selections whose per-point
/// indicators are local.
fn search_selection(task: &SummoningTask, budget: usize) -> Result<Result<Vec<Option<usize>>, Witness>, FeasibilityError> {
    let n = task.num_returns();
    let space = task.space();
    let cards = task.cardinalities();
    let mut offsets = Vec::with_capacity(n);
    let mut total = 0usize;
    for j in 0..n {
        offsets.push(total);
        total += task
            .causal()
            .past_inputs(j)
            .iter()
            .map(|&k| cards[k] as usize)
            .product::<usize>();
    }
    let class_of = |j: usize, m: &Assignment| -> usize {
        task.causal()
            .past_inputs(j)
            .iter()
            .fold(0usize, |acc, &k| acc * cards[k] as usize + m.0[k] as usize)
            + offsets[j]
    };

    let mut vars: Vec<Option<bool>> = vec![None; total];
    let mut rows = Vec::new();
    for rank in task.allowed_ranks() {
        let m = space.unrank(rank);
        let row_vars: Vec<usize> = (0..n).map(|j| class_of(j, &m)).collect();
        let candidates: Vec<usize> = task
            .image(rank)
            .iter()
            .copied()
            .filter(|&j| task.causal().start_precedes(j))
            .collect();
        if candidates.is_empty() && !task.image(rank).is_empty() {
            return Ok(Err(Witness::NoConsistentSelection { assignment: m }));
        }
        for j in 0..n {
            if !candidates.contains(&j) {
                vars[row_vars[j]] = Some(false);
            }
        }
        rows.push(Row {
            rank,
            vars: row_vars,
            candidates,
        });
    }
    let mut search = SelectionSearch {
        rows,
        budget,
        nodes: 0,
        deepest: (0, 0),
    };
    match search.solve(vars, 0)? {
        None => {
            let rank = search.rows.get(search.deepest.1).map_or(0, |r| r.rank);
            Ok(Err(Witness::NoConsistentSelection {
                assignment: space.unrank(rank),
            }))
        }
        Some(vars) => {
            let mut selection = vec![None; space.size()];
            for row in &search.rows {
                selection[row.rank] = row.candidates.iter().copied().find(|&j| vars[row.vars[j]] == Some(true));
            }
            Ok(Ok(selection))
        }
    }
}

fn rules_from_selection(task: &SummoningTask, selection: &[Option<usize>]) -> Vec<LocalDecisionRule> {
    let space = task.space();
    (0..task.num_returns())
        .map(|j| {
            let inputs = task.causal().past_inputs(j).to_vec();
            let mut table: Vec<RuleEntry> = Vec::new();
            let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
            for rank in task.allowed_ranks() {
                let r = space.unrank(rank).restrict(&inputs);
                let decision = if selection[rank] == Some(j) {
                    Decision::Return
                } else {
                    Decision::Silent
                };
                if !seen.contains_key(&r) {
                    seen.insert(r.clone(), table.len());
                    table.push(RuleEntry { restriction: r, decision });
                }
            }
            table.sort_by(|a, b| a.restriction.cmp(&b.restriction));
            LocalDecisionRule {
                return_index: j,
                inputs,
                table,
            }
        })
        .collect()
}

/// Checks that the rules fire exactly once, inside `Q(m)`, for every allowed
/// assignment with a non-empty image, and never otherwise.
pub fn replay_rules(task: &SummoningTask, rules: &[LocalDecisionRule]) -> bool {
    let space = task.space();
    task.allowed_ranks().all(|rank| {
        let m = space.unrank(rank);
        let mut fired = Vec::new();
        for rule in rules {
            match rule.decide_for(&m) {
                Some(Decision::Return) => fired.push(rule.return_index),
                Some(Decision::Silent) => {}
                None => return false,
            }
        }
        let image = task.image(rank);
        if image.is_empty() {
            fired.is_empty()
        } else {
            fired.len() == 1 && image.contains(&fired[0]) && task.causal().start_precedes(fired[0])
        }
    })
}

/// A multiple-return task refined by its selection function.
#[derive(Clone, Debug, PartialEq)]
pub struct Determinization {
    pub task: SummoningTask,
    /// Original index of each surviving return point.
    pub kept: Vec<usize>,
}

/// Replaces `Q(m)` by `{f(m)}` and drops return points the selection never uses.
/// Tasks that are not multiple-return pass through unchanged.
pub fn determinize(task: &SummoningTask, verdict: &FeasibilityVerdict) -> Result<Determinization, FeasibilityError> {
    if !verdict.possible {
        return Err(FeasibilityError::NotPossible);
    }
    if !task.variant().is_multiple() {
        return Ok(Determinization {
            task: task.clone(),
            kept: (0..task.num_returns()).collect(),
        });
    }
    let mut used = vec![false; task.num_returns()];
    for j in verdict.selection.iter().flatten() {
        used[*j] = true;
    }
    let kept: Vec<usize> = (0..task.num_returns()).filter(|&j| used[j]).collect();
    let mut new_index = vec![usize::MAX; task.num_returns()];
    for (new, &old) in kept.iter().enumerate() {
        new_index[old] = new;
    }
    let mut doc = task.to_document();
    doc.returns = kept.iter().map(|&j| task.return_point(j).clone()).collect();
    for (rank, row) in doc.map.iter_mut().enumerate() {
        row.returns = match verdict.selection[rank] {
            Some(j) => vec![new_index[j] as u64 + 1],
            None => vec![],
        };
    }
    Ok(Determinization {
        task: SummoningTask::from_document(&doc)?,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;
    use crate::spacetime::SpacetimePoint;
    use crate::task::{InputPoint, ReturnVariant};

    fn pt(t: i64, x: i64) -> SpacetimePoint {
        SpacetimePoint::exact(t, &[x], 1)
    }

    #[test]
    fn g1_is_possible_and_passes_screens() {
        let g1 = scenarios::g1();
        let v = classically_possible(&g1).unwrap();
        assert!(v.possible && v.verified);
        assert!(v.screens.iter().all(|s| s.passed), "{:?}", v.screens);
        assert_eq!(v.screens.len(), 3);
        for rule in &v.rules {
            assert_eq!(rule.inputs, vec![0, 1]);
            assert_eq!(rule.table.len(), 4);
        }
    }

    #[test]
    fn returns_outside_future_fail_first_screen() {
        let mut doc = scenarios::g1().to_document();
        doc.returns[1] = SpacetimePoint::exact(1, &[2], 2);
        let t = SummoningTask::from_document(&doc).unwrap();
        let s = check_returns_in_future(&t);
        assert!(!s.passed);
        assert_eq!(s.witness, Some(ScreenWitness::ReturnsOutsideFuture { returns: vec![1] }));
        let v = classically_possible(&t).unwrap();
        assert!(!v.possible);
        assert_eq!(v.witness, Some(Witness::ReturnOutsideFuture { return_index: 1 }));
    }

    #[test]
    fn single_return_at_start_passes() {
        let t = SummoningTask::from_fn(pt(0, 0), vec![], vec![pt(0, 0)], &[], |_| vec![0]).unwrap();
        assert!(check_returns_in_future(&t).passed);
        assert!(check_common_pasts(&t).passed);
        assert!(check_pairwise_exclusion(&t).unwrap().passed);
        assert!(classically_possible(&t).unwrap().possible);
    }

    #[test]
    fn no_summoning_geometry_has_empty_common_past() {
        let s = check_common_pasts(&scenarios::no_summoning());
        assert!(!s.passed);
        assert_eq!(s.witness, Some(ScreenWitness::EmptyCommonPasts { pairs: vec![(0, 1)] }));
    }

    #[test]
    fn ambiguous_restriction_on_common_past() {
        // P_2 only precedes Q_2, so S_12 = {1}, while the map reads m_2.
        let t = SummoningTask::from_fn(
            pt(0, 0),
            vec![
                InputPoint { point: pt(1, -1), cardinality: 2 },
                InputPoint { point: pt(1, 3), cardinality: 2 },
            ],
            vec![pt(3, -1), pt(3, 1)],
            &[],
            |m| vec![if m[1] == 0 { 0 } else { 1 }],
        )
        .unwrap();
        assert_eq!(t.causal().common_past(0, 1), vec![0]);
        let s = check_pairwise_exclusion(&t).unwrap();
        assert_eq!(
            s.witness,
            Some(ScreenWitness::AmbiguousRestriction {
                pair: (0, 1),
                inputs: vec![0],
                restriction: vec![0],
            })
        );
        assert!(!classically_possible(&t).unwrap().possible);
    }

    #[test]
    fn pairwise_exclusion_rejects_constrained_and_multiple() {
        assert!(check_pairwise_exclusion(&scenarios::no_summoning()).is_err());
        assert!(check_pairwise_exclusion(&scenarios::multi_call()).is_err());
    }

    #[test]
    fn constrained_no_summoning_is_classically_possible() {
        let v = classically_possible(&scenarios::no_summoning()).unwrap();
        assert!(v.possible);
        let informational: Vec<_> = v.screens.iter().filter(|s| s.informational).collect();
        assert_eq!(informational.len(), 1);
        assert_eq!(informational[0].screen, Screen::CommonPastsNonEmpty);
    }

    #[test]
    fn unconstrained_no_summoning_is_impossible() {
        let v = classically_possible(&scenarios::no_summoning_unconstrained()).unwrap();
        assert!(!v.possible);
        match v.witness {
            Some(Witness::NonLocalIndicator { return_index, ref past_inputs, ref first, ref second }) => {
                assert_eq!(return_index, 1);
                assert_eq!(past_inputs, &vec![1]);
                assert_eq!(first.restrict(past_inputs), second.restrict(past_inputs));
            }
            ref other => panic!("unexpected witness {other:?}"),
        }
    }

    fn always_both() -> SummoningTask {
        let g1 = scenarios::g1();
        SummoningTask::from_fn(
            g1.start().clone(),
            g1.inputs().to_vec(),
            g1.returns().to_vec(),
            &[],
            |_| vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn constant_selection_for_always_both() {
        let t = always_both();
        let v = classically_possible(&t).unwrap();
        assert!(v.possible);
        assert!(v.selection.iter().all(|s| *s == Some(0)));
        let d = determinize(&t, &v).unwrap();
        assert_eq!(d.kept, vec![0]);
        assert_eq!(d.task.num_returns(), 1);
        assert_eq!(d.task.variant().returns, ReturnVariant::OneReturn);
        assert!(classically_possible(&d.task).unwrap().possible);
    }

    #[test]
    fn at_most_one_passes_through_determinize() {
        let g1 = scenarios::g1();
        let v = classically_possible(&g1).unwrap();
        let d = determinize(&g1, &v).unwrap();
        assert_eq!(d.task, g1);
        assert_eq!(d.kept, vec![0, 1]);
    }

    #[test]
    fn determinize_follows_selection() {
        let t = scenarios::multi_call();
        let v = classically_possible(&t).unwrap();
        assert!(v.possible);
        let d = determinize(&t, &v).unwrap();
        for rank in 0..t.space().size() {
            let expected: Vec<usize> = v.selection[rank].into_iter().collect();
            let got: Vec<usize> = d.task.image(rank).iter().map(|&j| d.kept[j]).collect();
            assert_eq!(got, expected);
            if let Some(j) = v.selection[rank] {
                assert!(t.image(rank).contains(&j));
            }
        }
        // Lowest-index call first, since choices are tried ascending.
        assert_eq!(v.selection[t.space().rank(&[0, 1, 1]).unwrap()], Some(1));
    }

    #[test]
    fn determinize_refuses_impossible() {
        let t = scenarios::no_summoning_unconstrained();
        let v = classically_possible(&t).unwrap();
        assert!(matches!(determinize(&t, &v), Err(FeasibilityError::NotPossible)));
    }

    #[test]
    fn multiple_on_spacelike_returns_is_impossible() {
        // Each return sees only its own call; with both calls made either
        // choice needs the other side's input.
        let (start, inputs, returns) = {
            let t = scenarios::no_summoning();
            (t.start().clone(), t.inputs().to_vec(), t.returns().to_vec())
        };
        let t = SummoningTask::from_fn(start, inputs, returns, &[], |m| {
            (0..2).filter(|&i| m[i] == 1).collect()
        })
        .unwrap();
        let v = classically_possible(&t).unwrap();
        assert!(!v.possible);
        assert!(matches!(v.witness, Some(Witness::NoConsistentSelection { .. })));
    }

    #[test]
    fn budget_is_enforced() {
        let t = scenarios::multi_call();
        assert!(matches!(
            classically_possible_with_budget(&t, 0),
            Err(FeasibilityError::SearchBudgetExceeded(0))
        ));
    }
}

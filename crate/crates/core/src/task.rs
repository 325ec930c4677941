//! Summoning tasks: the start point, input points with bounded integer
//! inputs, return points and the explicit return map.
//!
//! Tasks are read from and written to [`TaskDocument`], the JSON file form,
//! whose return indices are 1-based. [`validate`] reports every structural
//! problem in a document; [`SummoningTask`] only exists for documents that
//! validate cleanly.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spacetime::{CausalOrder, CausalStructure, SpacetimeError, SpacetimePoint};

/// Largest input product space a task may have.
pub const DEFAULT_ASSIGNMENT_CAP: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid task: {0}")]
    Invalid(ValidationReport),
    #[error(
        "input space has {size} assignments, above the cap of {cap}; reduce the number of inputs or their cardinalities"
    )]
    TooLarge { size: String, cap: usize },
    #[error(transparent)]
    Spacetime(#[from] SpacetimeError),
    #[error("malformed task file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

/// One concrete choice `m_1 … m_M` of all inputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<u32>);

impl Assignment {
    pub fn values(&self) -> &[u32] {
        &self.0
    }

    /// Values at the given input indices, in that order.
    pub fn restrict(&self, inputs: &[usize]) -> Vec<u32> {
        inputs.iter().map(|&k| self.0[k]).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Mixed-radix product space `∏ {0..n_i-1}` in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentSpace {
    radices: Vec<u32>,
    size: usize,
}

impl AssignmentSpace {
    pub fn new(radices: &[u32], cap: usize) -> Result<Self, TaskError> {
        let mut size: u128 = 1;
        for &r in radices {
            size = size.saturating_mul(r as u128);
        }
        if size > cap as u128 {
            return Err(TaskError::TooLarge {
                size: size.to_string(),
                cap,
            });
        }
        Ok(AssignmentSpace {
            radices: radices.to_vec(),
            size: size as usize,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radices(&self) -> &[u32] {
        &self.radices
    }

    pub fn contains(&self, values: &[u32]) -> bool {
        values.len() == self.radices.len() && values.iter().zip(&self.radices).all(|(v, r)| v < r)
    }

    pub fn rank(&self, values: &[u32]) -> Option<usize> {
        if !self.contains(values) {
            return None;
        }
        Some(
            values
                .iter()
                .zip(&self.radices)
                .fold(0usize, |acc, (&v, &r)| acc * r as usize + v as usize),
        )
    }

    pub fn unrank(&self, mut rank: usize) -> Assignment {
        let mut values = vec![0u32; self.radices.len()];
        for (slot, &r) in values.iter_mut().zip(&self.radices).rev() {
            *slot = (rank % r as usize) as u32;
            rank /= r as usize;
        }
        Assignment(values)
    }

    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        (0..self.size).map(move |r| self.unrank(r))
    }
}

/// An input point and the number of values its input can take.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPoint {
    pub point: SpacetimePoint,
    pub cardinality: u32,
}

/// One row of the return map as written in task files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRow {
    pub m: Vec<u32>,
    /// 1-based return indices.
    pub returns: Vec<u64>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// JSON task file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub causal_epsilon: f64,
    pub start: SpacetimePoint,
    pub inputs: Vec<InputPoint>,
    pub returns: Vec<SpacetimePoint>,
    pub map: Vec<MapRow>,
    #[serde(default)]
    pub forbidden: Vec<Vec<u32>>,
}

impl TaskDocument {
    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("task documents always serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoReturnPoints,
    ZeroDimension,
    BadCausalEpsilon { value: f64 },
    DimensionMismatch { location: String, expected: usize, found: usize },
    CardinalityTooSmall { input: usize, cardinality: u32 },
    SpaceTooLarge { size: String, cap: usize },
    WrongAssignmentLength { m: Vec<u32>, expected: usize },
    AssignmentOutOfRange { m: Vec<u32> },
    DuplicateAssignment { m: Vec<u32> },
    MissingAssignments { count: usize, examples: Vec<Vec<u32>> },
    ReturnIndexOutOfRange { m: Vec<u32>, index: u64 },
    DuplicateReturnIndex { m: Vec<u32>, index: u64 },
    ForbiddenOutOfRange { m: Vec<u32> },
    DuplicateForbidden { m: Vec<u32> },
    UndesignatedReturn { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoReturnPoints => write!(f, "task has no return points"),
            Violation::ZeroDimension => write!(f, "spatial dimension must be at least 1"),
            Violation::BadCausalEpsilon { value } => {
                write!(f, "causal_epsilon must be finite and non-negative, got {value}")
            }
            Violation::DimensionMismatch { location, expected, found } => write!(
                f,
                "{location} has {found} spatial coordinates, expected {expected}"
            ),
            Violation::CardinalityTooSmall { input, cardinality } => write!(
                f,
                "input {input} has cardinality {cardinality}; every input needs at least 2 values"
            ),
            Violation::SpaceTooLarge { size, cap } => {
                write!(f, "input space has {size} assignments, cap is {cap}")
            }
            Violation::WrongAssignmentLength { m, expected } => {
                write!(f, "map row {m:?} has wrong length (expected {expected})")
            }
            Violation::AssignmentOutOfRange { m } => write!(f, "map row {m:?} is out of range"),
            Violation::DuplicateAssignment { m } => write!(f, "map row {m:?} appears twice"),
            Violation::MissingAssignments { count, examples } => write!(
                f,
                "map is missing {count} assignment(s), e.g. {examples:?}"
            ),
            Violation::ReturnIndexOutOfRange { m, index } => {
                write!(f, "map row {m:?} names return point {index}, which does not exist")
            }
            Violation::DuplicateReturnIndex { m, index } => {
                write!(f, "map row {m:?} lists return point {index} twice")
            }
            Violation::ForbiddenOutOfRange { m } => {
                write!(f, "forbidden assignment {m:?} is out of range")
            }
            Violation::DuplicateForbidden { m } => {
                write!(f, "forbidden assignment {m:?} is listed twice")
            }
            Violation::UndesignatedReturn { index } => write!(
                f,
                "return point {index} is never designated by an allowed assignment"
            ),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks a task document. Never fails; problems go into the report.
pub fn validate(doc: &TaskDocument) -> ValidationReport {
    validate_with_cap(doc, DEFAULT_ASSIGNMENT_CAP)
}

pub fn validate_with_cap(doc: &TaskDocument, cap: usize) -> ValidationReport {
    let mut out = Vec::new();
    let d = doc.dimension;
    if d == 0 {
        out.push(Violation::ZeroDimension);
    }
    if !doc.causal_epsilon.is_finite() || doc.causal_epsilon < 0.0 {
        out.push(Violation::BadCausalEpsilon {
            value: doc.causal_epsilon,
        });
    }
    let mut check_dim = |location: String, p: &SpacetimePoint| {
        if p.dimension() != d {
            out.push(Violation::DimensionMismatch {
                location,
                expected: d,
                found: p.dimension(),
            });
        }
    };
    check_dim("start point".into(), &doc.start);
    for (k, inp) in doc.inputs.iter().enumerate() {
        check_dim(format!("input point {}", k + 1), &inp.point);
    }
    for (j, q) in doc.returns.iter().enumerate() {
        check_dim(format!("return point {}", j + 1), q);
    }
    if doc.returns.is_empty() {
        out.push(Violation::NoReturnPoints);
    }
    for (k, inp) in doc.inputs.iter().enumerate() {
        if inp.cardinality < 2 {
            out.push(Violation::CardinalityTooSmall {
                input: k + 1,
                cardinality: inp.cardinality,
            });
        }
    }
    let radices: Vec<u32> = doc.inputs.iter().map(|i| i.cardinality).collect();
    let space = match AssignmentSpace::new(&radices, cap) {
        Ok(s) => s,
        Err(TaskError::TooLarge { size, cap }) => {
            out.push(Violation::SpaceTooLarge { size, cap });
            return ValidationReport::from_violations(out);
        }
        Err(_) => unreachable!("AssignmentSpace::new only reports size"),
    };

    let n = doc.returns.len() as u64;
    let mut seen = vec![false; space.size()];
    let mut images: Vec<Option<&[u64]>> = vec![None; space.size()];
    for row in &doc.map {
        if row.m.len() != radices.len() {
            out.push(Violation::WrongAssignmentLength {
                m: row.m.clone(),
                expected: radices.len(),
            });
            continue;
        }
        let Some(rank) = space.rank(&row.m) else {
            out.push(Violation::AssignmentOutOfRange { m: row.m.clone() });
            continue;
        };
        if seen[rank] {
            out.push(Violation::DuplicateAssignment { m: row.m.clone() });
            continue;
        }
        seen[rank] = true;
        let mut distinct = BTreeSet::new();
        for &idx in &row.returns {
            if idx == 0 || idx > n {
                out.push(Violation::ReturnIndexOutOfRange {
                    m: row.m.clone(),
                    index: idx,
                });
            } else if !distinct.insert(idx) {
                out.push(Violation::DuplicateReturnIndex {
                    m: row.m.clone(),
                    index: idx,
                });
            }
        }
        images[rank] = Some(&row.returns);
    }
    let missing: Vec<usize> = (0..space.size()).filter(|&r| !seen[r]).collect();
    if !missing.is_empty() {
        out.push(Violation::MissingAssignments {
            count: missing.len(),
            examples: missing
                .iter()
                .take(8)
                .map(|&r| space.unrank(r).0)
                .collect(),
        });
    }

    let mut forbidden = vec![false; space.size()];
    for m in &doc.forbidden {
        match space.rank(m) {
            None => out.push(Violation::ForbiddenOutOfRange { m: m.clone() }),
            Some(r) if forbidden[r] => out.push(Violation::DuplicateForbidden { m: m.clone() }),
            Some(r) => forbidden[r] = true,
        }
    }

    let mut designated = vec![false; doc.returns.len()];
    for (rank, image) in images.iter().enumerate() {
        if forbidden[rank] {
            continue;
        }
        for &idx in image.unwrap_or(&[]) {
            if idx >= 1 && idx <= n {
                designated[idx as usize - 1] = true;
            }
        }
    }
    for (j, ok) in designated.iter().enumerate() {
        if !ok {
            out.push(Violation::UndesignatedReturn { index: j + 1 });
        }
    }
    ValidationReport::from_violations(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnVariant {
    OneReturn,
    AtMostOne,
    Multiple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputConstraint {
    Unconstrained,
    Constrained,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Variant {
    pub returns: ReturnVariant,
    pub inputs: InputConstraint,
}

impl Variant {
    pub fn is_unconstrained(&self) -> bool {
        self.inputs == InputConstraint::Unconstrained
    }

    pub fn is_multiple(&self) -> bool {
        self.returns == ReturnVariant::Multiple
    }
}

/// A validated summoning task. Return and input indices are 0-based here.
#[derive(Clone, Debug, PartialEq)]
pub struct SummoningTask {
    name: Option<String>,
    dimension: usize,
    causal_epsilon: f64,
    start: SpacetimePoint,
    inputs: Vec<InputPoint>,
    returns: Vec<SpacetimePoint>,
    space: AssignmentSpace,
    /// Sorted return indices per assignment rank.
    images: Vec<Vec<usize>>,
    forbidden: Vec<bool>,
    causal: CausalStructure,
}

impl SummoningTask {
    pub fn from_document(doc: &TaskDocument) -> Result<Self, TaskError> {
        let report = validate(doc);
        if !report.valid {
            return Err(TaskError::Invalid(report));
        }
        let radices: Vec<u32> = doc.inputs.iter().map(|i| i.cardinality).collect();
        let space = AssignmentSpace::new(&radices, DEFAULT_ASSIGNMENT_CAP)?;
        let mut images = vec![Vec::new(); space.size()];
        for row in &doc.map {
            let rank = space.rank(&row.m).expect("validated");
            let mut img: Vec<usize> = row.returns.iter().map(|&i| i as usize - 1).collect();
            img.sort_unstable();
            images[rank] = img;
        }
        let mut forbidden = vec![false; space.size()];
        for m in &doc.forbidden {
            forbidden[space.rank(m).expect("validated")] = true;
        }
        let input_points: Vec<SpacetimePoint> = doc.inputs.iter().map(|i| i.point.clone()).collect();
        let causal = CausalStructure::compute(
            CausalOrder::new(doc.causal_epsilon),
            &doc.start,
            &input_points,
            &doc.returns,
        )?;
        Ok(SummoningTask {
            name: doc.name.clone(),
            dimension: doc.dimension,
            causal_epsilon: doc.causal_epsilon,
            start: doc.start.clone(),
            inputs: doc.inputs.clone(),
            returns: doc.returns.clone(),
            space,
            images,
            forbidden,
            causal,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        Self::from_document(&TaskDocument::from_json(text)?)
    }

    /// Builds a task from a return-map function. `map` gets the assignment
    /// values and returns 0-based return indices; `forbidden` lists the
    /// assignments that never arise.
    pub fn from_fn<F>(
        start: SpacetimePoint,
        inputs: Vec<InputPoint>,
        returns: Vec<SpacetimePoint>,
        forbidden: &[Vec<u32>],
        mut map: F,
    ) -> Result<Self, TaskError>
    where
        F: FnMut(&[u32]) -> Vec<usize>,
    {
        let radices: Vec<u32> = inputs.iter().map(|i| i.cardinality).collect();
        let space = AssignmentSpace::new(&radices, DEFAULT_ASSIGNMENT_CAP)?;
        let rows = space
            .iter()
            .map(|a| {
                let returns = map(a.values()).into_iter().map(|j| j as u64 + 1).collect();
                MapRow { m: a.0, returns }
            })
            .collect();
        let doc = TaskDocument {
            name: None,
            dimension: start.dimension(),
            causal_epsilon: 0.0,
            start,
            inputs,
            returns,
            map: rows,
            forbidden: forbidden.to_vec(),
        };
        Self::from_document(&doc)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn to_document(&self) -> TaskDocument {
        TaskDocument {
            name: self.name.clone(),
            dimension: self.dimension,
            causal_epsilon: self.causal_epsilon,
            start: self.start.clone(),
            inputs: self.inputs.clone(),
            returns: self.returns.clone(),
            map: self
                .space
                .iter()
                .zip(&self.images)
                .map(|(a, img)| MapRow {
                    m: a.0,
                    returns: img.iter().map(|&j| j as u64 + 1).collect(),
                })
                .collect(),
            forbidden: (0..self.space.size())
                .filter(|&r| self.forbidden[r])
                .map(|r| self.space.unrank(r).0)
                .collect(),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        self.to_document().to_json_pretty()
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn causal_order(&self) -> CausalOrder {
        CausalOrder::new(self.causal_epsilon)
    }

    pub fn start(&self) -> &SpacetimePoint {
        &self.start
    }

    pub fn inputs(&self) -> &[InputPoint] {
        &self.inputs
    }

    pub fn input_point(&self, k: usize) -> &SpacetimePoint {
        &self.inputs[k].point
    }

    pub fn returns(&self) -> &[SpacetimePoint] {
        &self.returns
    }

    pub fn return_point(&self, j: usize) -> &SpacetimePoint {
        &self.returns[j]
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_returns(&self) -> usize {
        self.returns.len()
    }

    pub fn cardinalities(&self) -> &[u32] {
        self.space.radices()
    }

    pub fn space(&self) -> &AssignmentSpace {
        &self.space
    }

    pub fn causal(&self) -> &CausalStructure {
        &self.causal
    }

    /// `Q(m)` by assignment rank.
    pub fn image(&self, rank: usize) -> &[usize] {
        &self.images[rank]
    }

    pub fn image_of(&self, assignment: &Assignment) -> Option<&[usize]> {
        self.space.rank(assignment.values()).map(|r| self.image(r))
    }

    pub fn is_allowed(&self, rank: usize) -> bool {
        !self.forbidden[rank]
    }

    pub fn is_constrained(&self) -> bool {
        self.forbidden.iter().any(|&f| f)
    }

    /// Ranks of the assignments that may arise, ascending.
    pub fn allowed_ranks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.space.size()).filter(move |&r| !self.forbidden[r])
    }

    pub fn variant(&self) -> Variant {
        classify_variant(self)
    }

    /// Reorders the return points: new index `t` is old index `perm[t]`.
    pub fn permute_returns(&self, perm: &[usize]) -> Result<Self, TaskError> {
        let n = self.num_returns();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..n).collect::<Vec<_>>() {
            return Err(TaskError::Other(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut doc = self.to_document();
        doc.returns = perm.iter().map(|&old| self.returns[old].clone()).collect();
        for row in &mut doc.map {
            for idx in &mut row.returns {
                *idx = inverse[*idx as usize - 1] as u64 + 1;
            }
            row.returns.sort_unstable();
        }
        Self::from_document(&doc)
    }
}

/// Variant of the return map over allowed assignments, and whether any
/// assignment is forbidden.
pub fn classify_variant(task: &SummoningTask) -> Variant {
    let mut any_empty = false;
    let mut any_multiple = false;
    for r in task.allowed_ranks() {
        match task.image(r).len() {
            0 => any_empty = true,
            1 => {}
            _ => any_multiple = true,
        }
    }
    let returns = if any_multiple {
        ReturnVariant::Multiple
    } else if any_empty {
        ReturnVariant::AtMostOne
    } else {
        ReturnVariant::OneReturn
    };
    let inputs = if task.is_constrained() {
        InputConstraint::Constrained
    } else {
        InputConstraint::Unconstrained
    };
    Variant { returns, inputs }
}

/// All assignments in lexicographic order, each flagged `true` when allowed.
pub fn enumerate_assignments(task: &SummoningTask) -> impl Iterator<Item = (Assignment, bool)> + '_ {
    (0..task.space.size()).map(move |r| (task.space.unrank(r), task.is_allowed(r)))
}

//! Minkowski geometry with `c = 1`: points, the closed causal order and the
//! input-point past sets consulted by every feasibility argument.
//!
//! Coordinates are either exact rationals (written as strings such as
//! `"3/2"` in task files) or binary floats. When both points are exact the
//! causal relation is decided in exact arithmetic. Float comparisons use a
//! configurable tolerance; with the default tolerance of zero, borderline
//! float cases fall back to exact evaluation of the float values, so the
//! relation stays a genuine partial order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::task::SummoningTask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpacetimeError {
    #[error("dimension mismatch: {0} vs {1} spatial coordinates")]
    DimensionMismatch(usize, usize),
    #[error("non-finite coordinate {0}")]
    NonFinite(f64),
    #[error("invalid coordinate literal {0:?}")]
    BadLiteral(String),
    #[error("index {index} out of range (have {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("common past requires two distinct return points, got {0} twice")]
    SameReturnPoint(usize),
}

/// A single coordinate value.
#[derive(Clone, Debug, PartialEq)]
pub enum Coord {
    Exact(BigRational),
    Float(f64),
}

impl Coord {
    pub fn float(v: f64) -> Result<Self, SpacetimeError> {
        if v.is_finite() {
            Ok(Coord::Float(v))
        } else {
            Err(SpacetimeError::NonFinite(v))
        }
    }

    pub fn int(v: i64) -> Self {
        Coord::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Coord::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coord::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Coord::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Coord::Float(v) => *v,
        }
    }

    /// Exact rational value. Floats convert without rounding.
    pub fn to_rational(&self) -> BigRational {
        match self {
            Coord::Exact(r) => r.clone(),
            Coord::Float(v) => BigRational::from_float(*v).expect("finite by construction"),
        }
    }
}

impl FromStr for Coord {
    type Err = SpacetimeError;

    /// Accepts `"p"`, `"p/q"` and plain decimals such as `"-1.25"`; all are exact.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SpacetimeError::BadLiteral(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Coord::Exact(BigRational::new(n, d)));
        }
        if let Some((int_part, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int_part.starts_with('-');
            let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac);
            let mut num: BigInt = digits.parse().map_err(|_| bad())?;
            if negative {
                num = -num;
            }
            let den = num_traits::pow(BigInt::from(10), frac.len());
            return Ok(Coord::Exact(BigRational::new(num, den)));
        }
        let n: BigInt = s.parse().map_err(|_| bad())?;
        Ok(Coord::Exact(BigRational::from_integer(n)))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Coord::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Coord::Float(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Coord::Exact(_) => serializer.serialize_str(&self.to_string()),
            Coord::Float(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CoordVisitor;

        impl Visitor<'_> for CoordVisitor {
            type Value = Coord;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a rational string like \"3/2\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Coord, E> {
                Coord::float(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Coord, E> {
                Ok(Coord::Float(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Coord, E> {
                Ok(Coord::Float(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Coord, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(CoordVisitor)
    }
}

/// An event in Minkowski spacetime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: Coord,
    pub x: Vec<Coord>,
}

impl SpacetimePoint {
    pub fn new(t: Coord, x: Vec<Coord>) -> Self {
        SpacetimePoint { t, x }
    }

    /// Float point; rejects non-finite coordinates.
    pub fn from_f64(t: f64, x: &[f64]) -> Result<Self, SpacetimeError> {
        Ok(SpacetimePoint {
            t: Coord::float(t)?,
            x: x.iter().map(|&v| Coord::float(v)).collect::<Result<_, _>>()?,
        })
    }

    /// Exact point from integer numerators over a shared denominator.
    pub fn exact(t: i64, x: &[i64], den: i64) -> Self {
        SpacetimePoint {
            t: Coord::ratio(t, den),
            x: x.iter().map(|&v| Coord::ratio(v, den)).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    pub fn is_exact(&self) -> bool {
        self.t.is_exact() && self.x.iter().all(Coord::is_exact)
    }

    fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .map(|c| c.to_f64().abs())
            .fold(self.t.to_f64().abs(), f64::max)
    }

    /// Lorentz boost along the single spatial axis with velocity `v` (|v| < 1).
    /// The result is a float point.
    pub fn boost_1d(&self, v: f64) -> Result<SpacetimePoint, SpacetimeError> {
        if self.dimension() != 1 {
            return Err(SpacetimeError::DimensionMismatch(self.dimension(), 1));
        }
        let gamma = 1.0 / (1.0 - v * v).sqrt();
        let t = self.t.to_f64();
        let x = self.x[0].to_f64();
        SpacetimePoint::from_f64(gamma * (t - v * x), &[gamma * (x - v * t)])
    }
}

impl fmt::Display for SpacetimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; ", self.t)?;
        for (i, c) in self.x.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// The closed causal order `a ⪯ b`, parameterised by the float tolerance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CausalOrder {
    /// Float comparisons accept `Δt − |Δx| ≥ −epsilon`.
    pub epsilon: f64,
}

impl CausalOrder {
    pub fn new(epsilon: f64) -> Self {
        CausalOrder { epsilon }
    }

    pub fn precedes(&self, a: &SpacetimePoint, b: &SpacetimePoint) -> Result<bool, SpacetimeError> {
        if a.dimension() != b.dimension() {
            return Err(SpacetimeError::DimensionMismatch(a.dimension(), b.dimension()));
        }
        if a.is_exact() && b.is_exact() {
            return Ok(precedes_exact(a, b));
        }
        let dt = b.t.to_f64() - a.t.to_f64();
        let norm = a
            .x
            .iter()
            .zip(&b.x)
            .map(|(p, q)| {
                let d = q.to_f64() - p.to_f64();
                d * d
            })
            .sum::<f64>()
            .sqrt();
        let slack = dt - norm;
        if self.epsilon > 0.0 {
            return Ok(slack >= -self.epsilon);
        }
        // Rounding in `slack` is far below this bound; inside it the float
        // values are compared exactly.
        let bound = 1e-12 * (1.0 + a.max_abs().max(b.max_abs()));
        if slack > bound {
            Ok(true)
        } else if slack < -bound {
            Ok(false)
        } else {
            Ok(precedes_exact(a, b))
        }
    }

    /// Signed distance from the light cone, `Δt − |Δx|`, in floats.
    pub fn slack(a: &SpacetimePoint, b: &SpacetimePoint) -> f64 {
        let dt = b.t.to_f64() - a.t.to_f64();
        let norm = a
            .x
            .iter()
            .zip(&b.x)
            .map(|(p, q)| (q.to_f64() - p.to_f64()).powi(2))
            .sum::<f64>()
            .sqrt();
        dt - norm
    }
}

fn precedes_exact(a: &SpacetimePoint, b: &SpacetimePoint) -> bool {
    let dt = b.t.to_rational() - a.t.to_rational();
    if dt.is_negative() {
        return false;
    }
    let spatial: BigRational = a
        .x
        .iter()
        .zip(&b.x)
        .map(|(p, q)| {
            let d = q.to_rational() - p.to_rational();
            &d * &d
        })
        .fold(BigRational::zero(), |acc, v| acc + v);
    (&dt * &dt).cmp(&spatial) != Ordering::Less
}

/// `a ⪯ b` with the default (zero) tolerance.
pub fn causally_precedes(a: &SpacetimePoint, b: &SpacetimePoint) -> Result<bool, SpacetimeError> {
    CausalOrder::default().precedes(a, b)
}

/// Input points in the causal past of one return point (or of two).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PastInputSet {
    #[serde(with = "crate::index::one_based_vec")]
    pub return_indices: Vec<usize>,
    /// Sorted input indices.
    #[serde(with = "crate::index::one_based_vec")]
    pub members: Vec<usize>,
}

impl PastInputSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, input: usize) -> bool {
        self.members.binary_search(&input).is_ok()
    }
}

/// `S_j`: inputs `k` with `P_k ⪯ Q_j` (0-based `j`).
pub fn past_input_set(task: &SummoningTask, j: usize) -> Result<PastInputSet, SpacetimeError> {
    let n = task.num_returns();
    if j >= n {
        return Err(SpacetimeError::IndexOutOfRange { index: j, len: n });
    }
    Ok(PastInputSet {
        return_indices: vec![j],
        members: task.causal().past_inputs(j).to_vec(),
    })
}

/// `S_ij = S_i ∩ S_j` for distinct return points.
pub fn common_past_input_set(
    task: &SummoningTask,
    i: usize,
    j: usize,
) -> Result<PastInputSet, SpacetimeError> {
    if i == j {
        return Err(SpacetimeError::SameReturnPoint(i));
    }
    let a = past_input_set(task, i)?;
    let b = past_input_set(task, j)?;
    Ok(PastInputSet {
        return_indices: vec![i.min(j), i.max(j)],
        members: a.members.into_iter().filter(|k| b.contains(*k)).collect(),
    })
}

/// Precomputed causal relations between a task's points.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalStructure {
    start_precedes_return: Vec<bool>,
    /// `past[j]` = sorted inputs in the past of return `j`.
    past: Vec<Vec<usize>>,
}

impl CausalStructure {
    pub fn compute(
        order: CausalOrder,
        start: &SpacetimePoint,
        inputs: &[SpacetimePoint],
        returns: &[SpacetimePoint],
    ) -> Result<Self, SpacetimeError> {
        let start_precedes_return = returns
            .iter()
            .map(|q| order.precedes(start, q))
            .collect::<Result<_, _>>()?;
        let past = returns
            .iter()
            .map(|q| {
                let mut members = Vec::new();
                for (k, p) in inputs.iter().enumerate() {
                    if order.precedes(p, q)? {
                        members.push(k);
                    }
                }
                Ok(members)
            })
            .collect::<Result<_, SpacetimeError>>()?;
        Ok(CausalStructure {
            start_precedes_return,
            past,
        })
    }

    pub fn start_precedes(&self, j: usize) -> bool {
        self.start_precedes_return[j]
    }

    pub fn past_inputs(&self, j: usize) -> &[usize] {
        &self.past[j]
    }

    pub fn common_past(&self, i: usize, j: usize) -> Vec<usize> {
        self.past[i]
            .iter()
            .copied()
            .filter(|k| self.past[j].binary_search(k).is_ok())
            .collect()
    }
}

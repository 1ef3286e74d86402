//! Discrete probability and utility primitives shared by the classifier and
//! the decision engine.
//!
//! Health-state labels are 1-based, actions are 0-based (`0` = do nothing).

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Absolute tolerance on the sum of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("probability vector is empty")]
    Empty,
    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entries sum to {sum}, deviation {deviation:e} from 1")]
    SumNotOne { sum: f64, deviation: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("row {row} of transition table: {source}")]
    BadRow {
        row: usize,
        #[source]
        source: Box<ProbError>,
    },
    #[error("transition table is not square ({rows} rows, row {row} has {cols} columns)")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("argmax of an empty vector")]
    EmptyInput,
    #[error("label {label} outside 1..={k}")]
    LabelOutOfRange { label: usize, k: usize },
}

/// A health-state label in `1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(usize);

impl ClassLabel {
    pub fn new(label: usize, k: usize) -> Result<Self, ProbError> {
        if label == 0 || label > k {
            return Err(ProbError::LabelOutOfRange { label, k });
        }
        Ok(ClassLabel(label))
    }

    /// Label from a 0-based class index.
    pub fn from_index(index: usize) -> Self {
        ClassLabel(index + 1)
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// 0-based position for indexing per-class arrays.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A decision alternative in `0..A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(pub usize);

impl Action {
    pub const DO_NOTHING: Action = Action(0);
    pub const MAINTAIN: Action = Action(1);

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A validated probability vector over `K` states.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates without renormalizing.
    pub fn new(probs: Vec<f64>) -> Result<Self, ProbError> {
        validate_probs(&probs)?;
        Ok(DiscreteDistribution { probs })
    }

    /// Point mass on the 0-based state `index` of a `k`-state space.
    pub fn point_mass(k: usize, index: usize) -> Self {
        assert!(index < k, "point mass index {index} outside 0..{k}");
        let mut probs = vec![0.0; k];
        probs[index] = 1.0;
        DiscreteDistribution { probs }
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0);
        DiscreteDistribution {
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// Built from already-normalized values (e.g. the output of a softmax).
    /// Callers guarantee the invariants; checked in debug builds.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(validate_probs(&probs).is_ok(), "{probs:?}");
        DiscreteDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable state (lowest index on ties).
    pub fn mode(&self) -> usize {
        argmax_with_tiebreak(&self.probs).expect("distribution is non-empty")
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(d)?;
        DiscreteDistribution::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Validates a raw probability vector.
pub fn validate_distribution(p: &[f64]) -> Result<DiscreteDistribution, ProbError> {
    DiscreteDistribution::new(p.to_vec())
}

fn validate_probs(p: &[f64]) -> Result<(), ProbError> {
    if p.is_empty() {
        return Err(ProbError::Empty);
    }
    for (index, &value) in p.iter().enumerate() {
        if !value.is_finite() {
            return Err(ProbError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(ProbError::NegativeEntry { index, value });
        }
    }
    let sum: f64 = p.iter().sum();
    let deviation = sum - 1.0;
    if deviation.abs() > SUM_TOLERANCE {
        return Err(ProbError::SumNotOne { sum, deviation });
    }
    Ok(())
}

/// Row-stochastic `K x K` table `P(next | current)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionCpt {
    rows: Vec<Vec<f64>>,
}

impl TransitionCpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ProbError> {
        let k = rows.len();
        if k == 0 {
            return Err(ProbError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(ProbError::NotSquare {
                    rows: k,
                    row,
                    cols: r.len(),
                });
            }
            validate_probs(r).map_err(|e| ProbError::BadRow {
                row,
                source: Box::new(e),
            })?;
        }
        Ok(TransitionCpt { rows })
    }

    /// Builds a `k x k` table from a row-major flat array.
    pub fn from_row_major(k: usize, values: &[f64]) -> Result<Self, ProbError> {
        if values.len() != k * k {
            return Err(ProbError::LengthMismatch {
                expected: k * k,
                got: values.len(),
            });
        }
        Self::new(values.chunks(k).map(<[f64]>::to_vec).collect())
    }

    pub fn identity(k: usize) -> Self {
        let rows = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        TransitionCpt { rows }
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, current: usize) -> &[f64] {
        &self.rows[current]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, current: usize, next: usize) -> f64 {
        self.rows[current][next]
    }

    /// Sub-chain on `states` (0-based), each row rescaled to sum to one.
    pub fn restrict(&self, states: &[usize]) -> Result<Self, ProbError> {
        let rows = states
            .iter()
            .map(|&i| {
                let sub: Vec<f64> = states.iter().map(|&j| self.rows[i][j]).collect();
                let mass: f64 = sub.iter().sum();
                sub.into_iter().map(|v| v / mass).collect()
            })
            .collect();
        Self::new(rows)
    }
}

impl<'de> Deserialize<'de> for TransitionCpt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        TransitionCpt::new(rows).map_err(serde::de::Error::custom)
    }
}

/// Utilities indexed by state or by action, in abstract utility units.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UtilityTable {
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn new(values: Vec<f64>) -> Result<Self, ProbError> {
        if values.is_empty() {
            return Err(ProbError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProbError::NonFinite { index });
        }
        Ok(UtilityTable { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl<'de> Deserialize<'de> for UtilityTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        UtilityTable::new(values).map_err(serde::de::Error::custom)
    }
}

/// `sum_k p_k * u_k`.
pub fn expectation(p: &DiscreteDistribution, u: &UtilityTable) -> Result<f64, ProbError> {
    dot(p.probs(), u.values())
}

pub(crate) fn dot(p: &[f64], u: &[f64]) -> Result<f64, ProbError> {
    if p.len() != u.len() {
        return Err(ProbError::LengthMismatch {
            expected: p.len(),
            got: u.len(),
        });
    }
    Ok(p.iter().zip(u).map(|(a, b)| a * b).sum())
}

/// Index of the maximum entry; exact ties go to the lowest index.
pub fn argmax_with_tiebreak(values: &[f64]) -> Result<usize, ProbError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).ok_or(ProbError::EmptyInput)
}

//! Core domain types: state spaces, Markov models, co-occurrence
//! observations, permutations and their elementary likelihood operations.
//!
//! An observation records the vertices touched by one transmission in an
//! arbitrary order. A permutation `tau` recovers a candidate path ordering
//! via `z[t] = y[tau[t]]`; the Markov model `(pi, A)` scores such orderings.

use std::collections::HashMap;
use std::fmt;

use ndarray::{Array1, Array2};

use crate::error::{NicoError, Result};

/// Finite sentinel for `log 0` so that comparisons and argmax stay total.
pub const LOG_ZERO: f64 = -1e300;

/// Tolerance on probability normalization checks.
pub const SUM_TOL: f64 = 1e-12;

/// Labeled state set with a label <-> index bijection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(NicoError::EmptyStateSpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(NicoError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Whether the first and last recorded vertices of an observation are the
/// true source and destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndpointMode {
    Free,
    KnownEndpoints,
}

impl fmt::Display for EndpointMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndpointMode::Free => write!(f, "free"),
            EndpointMode::KnownEndpoints => write!(f, "known"),
        }
    }
}

/// An unordered co-occurrence: the list of distinct state indices as
/// recorded, plus the endpoint mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    positions: Vec<usize>,
    endpoint_mode: EndpointMode,
}

impl Observation {
    pub fn new(positions: Vec<usize>, endpoint_mode: EndpointMode) -> Result<Self> {
        if positions.is_empty() {
            return Err(NicoError::EmptyObservation);
        }
        if endpoint_mode == EndpointMode::KnownEndpoints && positions.len() < 2 {
            return Err(NicoError::EndpointsNeedTwo(positions.len()));
        }
        let mut seen = HashMap::with_capacity(positions.len());
        for (t, &s) in positions.iter().enumerate() {
            if seen.insert(s, t).is_some() {
                return Err(NicoError::RepeatedVertex(t));
            }
        }
        Ok(Self {
            positions,
            endpoint_mode,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// State indices in recorded order.
    pub fn states(&self) -> &[usize] {
        &self.positions
    }

    pub fn mode(&self) -> EndpointMode {
        self.endpoint_mode
    }

    /// Same vertices under a different endpoint mode.
    pub fn with_mode(&self, mode: EndpointMode) -> Result<Self> {
        Self::new(self.positions.clone(), mode)
    }

    /// Source state (known-endpoints convention: first recorded vertex).
    pub fn source(&self) -> usize {
        self.positions[0]
    }

    /// Destination state (known-endpoints convention: last recorded vertex).
    pub fn dest(&self) -> usize {
        self.positions[self.positions.len() - 1]
    }
}

/// A bijection on observation positions, `0..n`. `tau[t]` is the recorded
/// position occupying step `t` of the reordered path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(tau: Vec<usize>) -> Result<Self> {
        let n = tau.len();
        let mut seen = vec![false; n];
        for &t in &tau {
            if t >= n || seen[t] {
                return Err(NicoError::NotAPermutation(n));
            }
            seen[t] = true;
        }
        Ok(Self(tau))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (t, &p) in self.0.iter().enumerate() {
            inv[p] = t;
        }
        Self(inv)
    }

    /// True when the permutation keeps the first and last positions fixed.
    pub fn fixes_endpoints(&self) -> bool {
        let n = self.0.len();
        n >= 2 && self.0[0] == 0 && self.0[n - 1] == n - 1
    }
}

/// Initial distribution plus row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub pi: Array1<f64>,
    pub a: Array2<f64>,
    /// Active entry floor; 0 disables flooring.
    pub theta_min: f64,
}

impl MarkovModel {
    pub fn new(pi: Array1<f64>, a: Array2<f64>, theta_min: f64) -> Result<Self> {
        let n = pi.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(NicoError::DimensionMismatch(format!(
                "pi has {} states but A is {}x{}",
                n,
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { pi, a, theta_min })
    }

    pub fn num_states(&self) -> usize {
        self.pi.len()
    }
}

/// Precomputed elementwise logs of a model, shared across E-step passes.
#[derive(Debug, Clone)]
pub struct LogModel {
    pub log_pi: Array1<f64>,
    pub log_a: Array2<f64>,
}

impl LogModel {
    pub fn new(model: &MarkovModel) -> Self {
        let log_pi = model.pi.mapv(safe_ln);
        let log_a = model.a.mapv(safe_ln);
        Self { log_pi, log_a }
    }

    /// Log-probability of an ordered state sequence.
    pub fn path_loglik(&self, path: &[usize]) -> f64 {
        let mut ll = self.log_pi[path[0]];
        for w in path.windows(2) {
            ll += self.log_a[[w[0], w[1]]];
            if ll <= LOG_ZERO {
                return LOG_ZERO;
            }
        }
        ll.max(LOG_ZERO)
    }
}

pub(crate) fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        LOG_ZERO
    }
}

/// One violated model invariant, with location and residual.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelViolation {
    DimensionMismatch { rows: usize, cols: usize, states: usize },
    PiSum { residual: f64 },
    RowSum { row: usize, residual: f64 },
    NegativePi { index: usize, value: f64 },
    NegativeEntry { row: usize, col: usize, value: f64 },
    PiBelowFloor { index: usize, value: f64, floor: f64 },
    EntryBelowFloor { row: usize, col: usize, value: f64, floor: f64 },
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::DimensionMismatch { rows, cols, states } => {
                write!(f, "A is {rows}x{cols} but pi has {states} states")
            }
            ModelViolation::PiSum { residual } => {
                write!(f, "pi sums to 1{residual:+e}")
            }
            ModelViolation::RowSum { row, residual } => {
                write!(f, "row {row} of A sums to 1{residual:+e}")
            }
            ModelViolation::NegativePi { index, value } => {
                write!(f, "pi[{index}] = {value} is negative")
            }
            ModelViolation::NegativeEntry { row, col, value } => {
                write!(f, "A[{row},{col}] = {value} is negative")
            }
            ModelViolation::PiBelowFloor { index, value, floor } => {
                write!(f, "pi[{index}] = {value} is below the floor {floor}")
            }
            ModelViolation::EntryBelowFloor { row, col, value, floor } => {
                write!(f, "A[{row},{col}] = {value} is below the floor {floor}")
            }
        }
    }
}

/// Reports every violated normalization/nonnegativity/floor invariant.
/// Returns an empty list for a valid model; never fails.
pub fn validate_model(model: &MarkovModel) -> Vec<ModelViolation> {
    let mut violations = Vec::new();
    let n = model.num_states();
    if model.a.nrows() != n || model.a.ncols() != n {
        violations.push(ModelViolation::DimensionMismatch {
            rows: model.a.nrows(),
            cols: model.a.ncols(),
            states: n,
        });
        return violations;
    }

    let floor = model.theta_min;
    let pi_sum: f64 = model.pi.iter().sum();
    if (pi_sum - 1.0).abs() > SUM_TOL {
        violations.push(ModelViolation::PiSum {
            residual: pi_sum - 1.0,
        });
    }
    for (i, &p) in model.pi.iter().enumerate() {
        if p < 0.0 {
            violations.push(ModelViolation::NegativePi { index: i, value: p });
        } else if floor > 0.0 && p < floor {
            violations.push(ModelViolation::PiBelowFloor {
                index: i,
                value: p,
                floor,
            });
        }
    }
    for (i, row) in model.a.rows().into_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            violations.push(ModelViolation::RowSum {
                row: i,
                residual: s - 1.0,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 {
                violations.push(ModelViolation::NegativeEntry { row: i, col: j, value: v });
            } else if floor > 0.0 && v < floor {
                violations.push(ModelViolation::EntryBelowFloor {
                    row: i,
                    col: j,
                    value: v,
                    floor,
                });
            }
        }
    }
    violations
}

/// Recovers the ordered state sequence `z[t] = y[tau[t]]`.
pub fn unshuffle(obs: &Observation, perm: &Permutation) -> Result<Vec<usize>> {
    if perm.len() != obs.len() {
        return Err(NicoError::LengthMismatch {
            perm: perm.len(),
            obs: obs.len(),
        });
    }
    Ok(perm.as_slice().iter().map(|&t| obs.states()[t]).collect())
}

/// Log-probability of an ordered state sequence under the model,
/// `log pi[z1] + sum log A[z(t-1), z(t)]`. Returns the `LOG_ZERO` sentinel
/// if any factor vanishes.
pub fn ordered_loglik(model: &MarkovModel, path: &[usize]) -> Result<f64> {
    if path.is_empty() {
        return Err(NicoError::EmptyObservation);
    }
    let n = model.num_states();
    for &s in path {
        if s >= n {
            return Err(NicoError::StateOutOfRange {
                index: s,
                num_states: n,
            });
        }
    }
    let mut ll = safe_ln(model.pi[path[0]]);
    for w in path.windows(2) {
        ll += safe_ln(model.a[[w[0], w[1]]]);
        if ll <= LOG_ZERO {
            return Ok(LOG_ZERO);
        }
    }
    Ok(ll.max(LOG_ZERO))
}

/// Per-observation expected E-step statistics.
///
/// `r1[t]` is the expected probability that recorded position `t` is the
/// first step of the path. `alpha[(p, q)]` is the expected mass that
/// position `q` immediately precedes position `p` along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub r1: Array1<f64>,
    pub alpha: Array2<f64>,
}

impl SufficientStats {
    pub fn zeros(n: usize) -> Self {
        Self {
            r1: Array1::zeros(n),
            alpha: Array2::zeros((n, n)),
        }
    }

    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
    }
}

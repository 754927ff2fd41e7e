//! Frequency-method baseline: orders each known-endpoints observation by
//! pairwise co-occurrence scores relative to its source and destination,
//! breaking ties uniformly at random, and builds the resulting graph.
//!
//! The interior score is `count(s, v) - count(v, d)`: vertices frequently
//! seen with the source sort early, vertices frequently seen with the
//! destination sort late. The published method leaves the exact formula to
//! its reference; this one is monotone in source proximity on tree-like
//! shortest-path data and is kept as the single configuration point here.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{NicoError, Result};
use crate::graph::DirectedGraph;
use crate::model::{EndpointMode, Observation, Permutation, StateSpace};
use crate::reconstruct::build_graph;
use crate::rng::{derive_rng, purpose};

/// Symmetric pair counts: how many observations contain both states.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceCounts {
    counts: HashMap<(usize, usize), u64>,
}

impl CooccurrenceCounts {
    pub fn get(&self, a: usize, b: usize) -> u64 {
        if a == b {
            return 0;
        }
        let key = (a.min(b), a.max(b));
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Counts, for every unordered state pair, the observations containing both.
pub fn cooccurrence_counts(observations: &[Observation]) -> CooccurrenceCounts {
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    for obs in observations {
        let states = obs.states();
        for (i, &a) in states.iter().enumerate() {
            for &b in &states[i + 1..] {
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
    }
    CooccurrenceCounts { counts }
}

/// Orders one known-endpoints observation: source first, destination last,
/// interior vertices by descending `count(s, v) - count(v, d)` with
/// equal-score blocks permuted uniformly at random.
pub fn fm_order<R: Rng + ?Sized>(
    obs: &Observation,
    counts: &CooccurrenceCounts,
    rng: &mut R,
) -> Result<Permutation> {
    if obs.mode() != EndpointMode::KnownEndpoints {
        return Err(NicoError::RequiresKnownEndpoints);
    }
    let n = obs.len();
    let states = obs.states();
    let s = obs.source();
    let d = obs.dest();

    let mut interior: Vec<(i64, u64, usize)> = (1..n - 1)
        .map(|t| {
            let v = states[t];
            let score = counts.get(s, v) as i64 - counts.get(v, d) as i64;
            (score, rng.gen::<u64>(), t)
        })
        .collect();
    // Descending score; ties resolved by the random key.
    interior.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut tau = Vec::with_capacity(n);
    tau.push(0);
    tau.extend(interior.into_iter().map(|(_, _, t)| t));
    tau.push(n - 1);
    Permutation::new(tau)
}

/// Orders every observation with the frequency method and unions the
/// resulting paths into a graph. Deterministic given the seed.
pub fn fm_reconstruct(
    space: &StateSpace,
    observations: &[Observation],
    seed: u64,
) -> Result<DirectedGraph> {
    let counts = cooccurrence_counts(observations);
    let mut paths = Vec::with_capacity(observations.len());
    for (idx, obs) in observations.iter().enumerate() {
        let mut rng = derive_rng(seed, &[purpose::FM, idx as u64]);
        let tau = fm_order(obs, &counts, &mut rng)?;
        paths.push(crate::model::unshuffle(obs, &tau)?);
    }
    Ok(build_graph(space, &paths))
}

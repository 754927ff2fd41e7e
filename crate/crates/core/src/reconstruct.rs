//! Graph reconstruction from a fitted model: most-likely-order decoding,
//! edge insertion, feasibility verification, and stationary/joint edge
//! scores.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{NicoError, Result};
use crate::exact_estep::for_each_permutation;
use crate::graph::DirectedGraph;
use crate::model::{
    EndpointMode, LogModel, MarkovModel, Observation, Permutation, StateSpace, LOG_ZERO,
};
use crate::sampler::draw_causal_sample;

fn perm_loglik(logm: &LogModel, states: &[usize], tau: &[usize]) -> f64 {
    let mut ll = logm.log_pi[states[tau[0]]];
    for t in 1..tau.len() {
        ll += logm.log_a[[states[tau[t - 1]], states[tau[t]]]];
        if ll <= LOG_ZERO {
            return LOG_ZERO;
        }
    }
    ll.max(LOG_ZERO)
}

/// Best-improvement pairwise-swap local search; never returns an order
/// worse than the starting one.
fn hill_climb(logm: &LogModel, obs: &Observation, mut tau: Vec<usize>, mut best: f64) -> Vec<usize> {
    let n = tau.len();
    let (lo, hi) = match obs.mode() {
        EndpointMode::Free => (0, n),
        EndpointMode::KnownEndpoints => (1, n - 1),
    };
    loop {
        let mut improved = false;
        let mut best_swap = (0, 0);
        for i in lo..hi {
            for j in (i + 1)..hi {
                tau.swap(i, j);
                let ll = perm_loglik(logm, obs.states(), &tau);
                tau.swap(i, j);
                if ll > best {
                    best = ll;
                    best_swap = (i, j);
                    improved = true;
                }
            }
        }
        if !improved {
            return tau;
        }
        tau.swap(best_swap.0, best_swap.1);
    }
}

/// Most likely permutation of one observation under the model.
///
/// Within the enumeration cap this is the exact argmax (ties broken by the
/// lexicographically smallest `tau`). Above the cap it is the best of
/// `samples` causal importance samples improved by pairwise-swap hill
/// climbing; a heuristic, as enumeration is unavailable there.
pub fn most_likely_order<R: Rng + ?Sized>(
    model: &MarkovModel,
    obs: &Observation,
    cap: usize,
    samples: usize,
    rng: &mut R,
) -> Result<Permutation> {
    let logm = LogModel::new(model);
    let n = obs.len();
    if n <= cap {
        let mut best_ll = LOG_ZERO;
        let mut best: Option<Vec<usize>> = None;
        for_each_permutation(n, obs.mode(), |tau| {
            let ll = perm_loglik(&logm, obs.states(), tau);
            if ll > best_ll {
                best_ll = ll;
                best = Some(tau.to_vec());
            }
        })?;
        let tau = best.ok_or(NicoError::ZeroSupportObservation)?;
        return Permutation::new(tau);
    }

    let mut best_tau: Option<Vec<usize>> = None;
    let mut best_ll = LOG_ZERO;
    for _ in 0..samples.max(1) {
        let s = draw_causal_sample(model, obs, rng);
        if s.log_target_unnorm > best_ll || best_tau.is_none() {
            best_ll = s.log_target_unnorm;
            best_tau = Some(s.perm.as_slice().to_vec());
        }
    }
    let start = best_tau.expect("at least one sample drawn");
    let climbed = hill_climb(&logm, obs, start, best_ll);
    let final_ll = perm_loglik(&logm, obs.states(), &climbed);
    if final_ll <= LOG_ZERO {
        return Err(NicoError::ZeroSupportObservation);
    }
    Permutation::new(climbed)
}

/// Inserts an edge for every consecutive pair of every ordered path.
pub fn build_graph(space: &StateSpace, ordered_paths: &[Vec<usize>]) -> DirectedGraph {
    let mut g = DirectedGraph::new(space.clone());
    for path in ordered_paths {
        for w in path.windows(2) {
            g.add_edge(w[0], w[1]);
        }
    }
    g
}

/// True iff every observation, reordered by its permutation, is an
/// edge-consecutive path of the graph.
pub fn feasibility_check(
    graph: &DirectedGraph,
    observations: &[Observation],
    orders: &[Permutation],
) -> bool {
    if observations.len() != orders.len() {
        return false;
    }
    observations.iter().zip(orders).all(|(obs, perm)| {
        match crate::model::unshuffle(obs, perm) {
            Ok(path) => path.windows(2).all(|w| graph.contains_edge(w[0], w[1])),
            Err(_) => false,
        }
    })
}

/// Stationary distribution of a row-stochastic matrix.
#[derive(Debug, Clone)]
pub struct StationaryResult {
    pub dist: Array1<f64>,
    /// Power iteration needed the damped chain (reducible/periodic input).
    pub damped: bool,
    /// Distinct starting points converged to different fixed points.
    pub multiple_stationary: bool,
}

const STATIONARY_TOL: f64 = 1e-10;
const STATIONARY_MAX_ITERS: usize = 100_000;

fn power_iterate(a: &Array2<f64>, start: Array1<f64>) -> Option<Array1<f64>> {
    let mut x = start;
    for _ in 0..STATIONARY_MAX_ITERS {
        let mut next = x.dot(a);
        let s: f64 = next.sum();
        next.mapv_inplace(|v| v / s);
        let delta = x
            .iter()
            .zip(next.iter())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        x = next;
        if delta < STATIONARY_TOL {
            return Some(x);
        }
    }
    None
}

/// Power iteration from the uniform start; a reducible or periodic chain
/// falls back to a 0.999-damped blend toward uniform and reports it.
pub fn stationary_distribution(a: &Array2<f64>) -> Result<StationaryResult> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(NicoError::DimensionMismatch(format!(
            "A is {}x{}",
            n,
            a.ncols()
        )));
    }
    let damp = |a: &Array2<f64>| -> Array2<f64> {
        let uniform = 1.0 / n as f64;
        a.mapv(|v| 0.999 * v + 0.001 * uniform)
    };

    let uniform = Array1::from_elem(n, 1.0 / n as f64);
    let mut damped = false;
    let primary = match power_iterate(a, uniform.clone()) {
        Some(x) => x,
        None => {
            damped = true;
            power_iterate(&damp(a), uniform.clone())
                .ok_or(NicoError::StationaryNotConverged(STATIONARY_MAX_ITERS))?
        }
    };

    // Probe from a skewed start to detect multiple stationary distributions.
    let mut skewed = Array1::zeros(n);
    for (i, v) in skewed.iter_mut().enumerate() {
        *v = (i + 1) as f64;
    }
    let s: f64 = skewed.sum();
    skewed.mapv_inplace(|v| v / s);
    let probe = match power_iterate(a, skewed.clone()) {
        Some(x) => Some(x),
        None => power_iterate(&damp(a), skewed),
    };
    let multiple_stationary = match probe {
        Some(x) => {
            let delta = x
                .iter()
                .zip(primary.iter())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            delta > 1e-6
        }
        None => true,
    };

    let dist = if multiple_stationary { uniform } else { primary };
    Ok(StationaryResult {
        dist,
        damped,
        multiple_stationary,
    })
}

/// Joint edge scores `score(i, j) = stationary_i * A[i, j]`; the matrix
/// sums to one.
pub fn edge_joint_scores(model: &MarkovModel) -> Result<Array2<f64>> {
    let st = stationary_distribution(&model.a)?;
    let n = model.num_states();
    let mut scores = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            scores[[i, j]] = st.dist[i] * model.a[[i, j]];
        }
    }
    Ok(scores)
}

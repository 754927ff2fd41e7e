//! Synthetic data generation: random geometric graphs, shortest-path and
//! random routing, Markov-model path sampling, and shuffling paths into
//! co-occurrence observations.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{NicoError, Result};
use crate::graph::DirectedGraph;
use crate::model::{EndpointMode, MarkovModel, Observation, Permutation, StateSpace};

/// The connectivity-threshold radius `sqrt(log(n)/n)` for `n` vertices in
/// the unit square.
pub fn connectivity_radius(n: usize) -> f64 {
    ((n as f64).ln() / n as f64).sqrt()
}

/// A generated geometric graph with its vertex coordinates.
#[derive(Debug, Clone)]
pub struct GeoGraph {
    pub graph: DirectedGraph,
    pub coords: Vec<(f64, f64)>,
    /// False when the retry cap was exhausted without a connected draw.
    pub connected: bool,
}

const RGG_RETRY_CAP: usize = 100;

/// Throws `n` vertices uniformly in the unit square and connects pairs at
/// Euclidean distance at most `radius`, materializing the undirected
/// adjacency as edges in both directions. Disconnected draws are retried
/// up to a cap and the last draw is returned with a warning flag.
pub fn random_geometric_graph<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> GeoGraph {
    let width = (n.max(2) as f64).log10().ceil() as usize;
    let labels: Vec<String> = (0..n).map(|i| format!("v{i:0width$}")).collect();
    let mut last = None;
    for _ in 0..RGG_RETRY_CAP {
        let coords: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        let space = StateSpace::new(labels.clone()).expect("labels are unique");
        let mut graph = DirectedGraph::new(space);
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coords[i].0 - coords[j].0;
                let dy = coords[i].1 - coords[j].1;
                if (dx * dx + dy * dy).sqrt() <= radius {
                    graph.add_edge(i, j);
                    graph.add_edge(j, i);
                }
            }
        }
        let connected = graph.is_connected_undirected();
        let out = GeoGraph {
            graph,
            coords,
            connected,
        };
        if connected {
            return out;
        }
        last = Some(out);
    }
    last.expect("retry cap is positive")
}

/// Minimum-hop path from `s` to `d`; among equal-length paths, the
/// lexicographically smallest label sequence.
pub fn shortest_path_route(graph: &DirectedGraph, s: usize, d: usize) -> Result<Vec<usize>> {
    if s == d {
        return Ok(vec![s]);
    }
    let n = graph.num_vertices();
    // BFS from d over reversed edges gives hop distance to d.
    let mut dist = vec![usize::MAX; n];
    let mut rev_adj = vec![Vec::new(); n];
    for (u, v) in graph.edges() {
        rev_adj[v].push(u);
    }
    dist[d] = 0;
    let mut queue = VecDeque::from([d]);
    while let Some(v) = queue.pop_front() {
        for &u in &rev_adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if dist[s] == usize::MAX {
        return Err(NicoError::Unreachable { src: s, dest: d });
    }
    // Greedy descent toward d, picking the smallest label each hop.
    let mut path = vec![s];
    let mut current = s;
    while current != d {
        let next = graph
            .out_neighbors(current)
            .into_iter()
            .filter(|&v| dist[v] != usize::MAX && dist[v] + 1 == dist[current])
            .min_by(|&a, &b| graph.space().label(a).cmp(graph.space().label(b)))
            .expect("a shortest path exists");
        path.push(next);
        current = next;
    }
    Ok(path)
}

const ROUTE_RETRY_CAP: usize = 100;

/// Loop-erased random walk from `s` until `d` is hit; the walk restarts
/// after `max_steps` without reaching `d`, up to a retry cap.
pub fn random_route<R: Rng + ?Sized>(
    graph: &DirectedGraph,
    s: usize,
    d: usize,
    rng: &mut R,
    max_steps: usize,
) -> Result<Vec<usize>> {
    if s == d {
        return Ok(vec![s]);
    }
    'attempt: for _ in 0..ROUTE_RETRY_CAP {
        let mut path = vec![s];
        for _ in 0..max_steps {
            let current = *path.last().unwrap();
            let neighbors = graph.out_neighbors(current);
            if neighbors.is_empty() {
                continue 'attempt;
            }
            let next = neighbors[rng.gen_range(0..neighbors.len())];
            if next == d {
                path.push(d);
                return Ok(path);
            }
            if let Some(pos) = path.iter().position(|&v| v == next) {
                path.truncate(pos + 1); // erase the loop
            } else {
                path.push(next);
            }
        }
    }
    Err(NicoError::RouteRetryExhausted(ROUTE_RETRY_CAP))
}

const RESAMPLE_CAP: usize = 200;

fn weighted_state<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc && w > 0.0 {
            return i;
        }
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("positive total")
}

/// Samples `t` simple paths from `(pi, A)`, drawing each path's length from
/// `length_sampler` and resampling any step that would repeat a state.
pub fn markov_paths<R: Rng + ?Sized>(
    model: &MarkovModel,
    t: usize,
    mut length_sampler: impl FnMut(&mut R) -> usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let num_states = model.num_states();
    let pi_total: f64 = model.pi.sum();
    let pi_slice: Vec<f64> = model.pi.to_vec();
    let mut paths = Vec::with_capacity(t);
    for _ in 0..t {
        let len = length_sampler(rng).max(1);
        if len > num_states {
            return Err(NicoError::InvalidParameter(format!(
                "requested path length {len} exceeds {num_states} states"
            )));
        }
        let mut path = Vec::with_capacity(len);
        path.push(weighted_state(&pi_slice, pi_total, rng));
        while path.len() < len {
            let prev = *path.last().unwrap();
            let row: Vec<f64> = model.a.row(prev).to_vec();
            let total: f64 = row.iter().sum();
            let mut accepted = None;
            for _ in 0..RESAMPLE_CAP {
                let cand = weighted_state(&row, total, rng);
                if !path.contains(&cand) {
                    accepted = Some(cand);
                    break;
                }
            }
            match accepted {
                Some(s) => path.push(s),
                None => {
                    return Err(NicoError::ResampleCapExhausted {
                        step: path.len(),
                        len,
                    })
                }
            }
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Shuffles ordered paths into observations, returning the ground-truth
/// permutation alongside each one (`unshuffle(obs, tau)` recovers the
/// path). Known-endpoints mode keeps the endpoints at the first and last
/// recorded positions and shuffles the interior; singleton paths are always
/// emitted in free mode.
pub fn shuffle_paths<R: Rng + ?Sized>(
    paths: &[Vec<usize>],
    mode: EndpointMode,
    rng: &mut R,
) -> Result<Vec<(Observation, Permutation)>> {
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let n = path.len();
        let obs_mode = if n < 2 { EndpointMode::Free } else { mode };
        let mut tau: Vec<usize> = (0..n).collect();
        match obs_mode {
            EndpointMode::Free => {
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    tau.swap(i, j);
                }
            }
            EndpointMode::KnownEndpoints => {
                for i in (2..n - 1).rev() {
                    let j = rng.gen_range(1..=i);
                    tau.swap(i, j);
                }
            }
        }
        let mut recorded = vec![0usize; n];
        for (t, &pos) in tau.iter().enumerate() {
            recorded[pos] = path[t];
        }
        let obs = Observation::new(recorded, obs_mode)?;
        out.push((obs, Permutation::new(tau)?));
    }
    Ok(out)
}

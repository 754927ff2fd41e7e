//! Shared helpers for integration tests: random instances and an
//! enumeration oracle kept independent of the library's E-step path.

use ndarray::{Array1, Array2};
use rand::Rng;

use nico_core::model::{EndpointMode, MarkovModel, Observation};

/// Random strictly-positive model (every order has positive probability).
pub fn random_model<R: Rng + ?Sized>(num_states: usize, rng: &mut R) -> MarkovModel {
    let mut pi = Array1::zeros(num_states);
    for v in pi.iter_mut() {
        *v = rng.gen::<f64>() + 0.02;
    }
    let total: f64 = pi.sum();
    pi.mapv_inplace(|v| v / total);
    let mut a = Array2::zeros((num_states, num_states));
    for i in 0..num_states {
        let mut row_sum = 0.0;
        for j in 0..num_states {
            let v = rng.gen::<f64>() + 0.02;
            a[[i, j]] = v;
            row_sum += v;
        }
        for j in 0..num_states {
            a[[i, j]] /= row_sum;
        }
    }
    MarkovModel::new(pi, a, 0.0).unwrap()
}

/// Random observation over distinct states.
pub fn random_observation<R: Rng + ?Sized>(
    num_states: usize,
    len: usize,
    mode: EndpointMode,
    rng: &mut R,
) -> Observation {
    assert!(len <= num_states);
    let mut states: Vec<usize> = (0..num_states).collect();
    for i in (1..num_states).rev() {
        let j = rng.gen_range(0..=i);
        states.swap(i, j);
    }
    states.truncate(len);
    Observation::new(states, mode).unwrap()
}

/// All permutations of `0..n` by simple recursion; intentionally a
/// different algorithm from the library's streaming enumerator.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let n = used.len();
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for t in 0..n {
            if !used[t] {
                used[t] = true;
                prefix.push(t);
                rec(prefix, used, out);
                prefix.pop();
                used[t] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Probability-domain likelihood of one ordering, by direct multiplication.
pub fn order_prob(model: &MarkovModel, states: &[usize], tau: &[usize]) -> f64 {
    let mut p = model.pi[states[tau[0]]];
    for t in 1..tau.len() {
        p *= model.a[[states[tau[t - 1]], states[tau[t]]]];
    }
    p
}

/// Brute-force oracle statistics from the definition: the posterior over
/// permutations is normalized explicitly and expectations are plain sums.
/// Known-endpoints statistics come from filtering the free enumeration.
pub struct OracleStats {
    pub r1: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    /// `log P[y | A, pi]` including the permutation-count normalizer.
    pub log_marginal: f64,
}

pub fn oracle_stats(model: &MarkovModel, obs: &Observation) -> OracleStats {
    let n = obs.len();
    let states = obs.states();
    let keep = |tau: &[usize]| match obs.mode() {
        EndpointMode::Free => true,
        EndpointMode::KnownEndpoints => tau[0] == 0 && tau[n - 1] == n - 1,
    };
    let perms: Vec<Vec<usize>> = all_permutations(n).into_iter().filter(|t| keep(t)).collect();
    let probs: Vec<f64> = perms.iter().map(|t| order_prob(model, states, t)).collect();
    let total: f64 = probs.iter().sum();
    assert!(total > 0.0, "oracle requires a supported observation");

    let mut r1 = vec![0.0; n];
    let mut alpha = vec![vec![0.0; n]; n];
    for (tau, &p) in perms.iter().zip(&probs) {
        let post = p / total;
        r1[tau[0]] += post;
        for t in 1..n {
            alpha[tau[t]][tau[t - 1]] += post;
        }
    }
    let count = perms.len() as f64;
    OracleStats {
        r1,
        alpha,
        log_marginal: (total / count).ln(),
    }
}

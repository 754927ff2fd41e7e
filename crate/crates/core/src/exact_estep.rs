//! Exact E-step by enumeration over permutations.
//!
//! Computes the expected initial-position probabilities and the expected
//! transition-adjacency mass for one observation, together with its exact
//! marginal log-likelihood. Enumeration covers all `N!` orderings, or the
//! `(N-2)!` orderings with fixed endpoints in known-endpoints mode, and is
//! gated by a configurable length cap.

use crate::error::{NicoError, Result};
use crate::model::{
    EndpointMode, LogModel, MarkovModel, Observation, Permutation, SufficientStats, LOG_ZERO,
};

/// Default length cap for exact enumeration.
pub const DEFAULT_EXACT_CAP: usize = 12;

/// Number of permutations enumerated for a length-`n` observation.
pub fn perm_count(n: usize, mode: EndpointMode) -> f64 {
    let free = match mode {
        EndpointMode::Free => n,
        EndpointMode::KnownEndpoints => n.saturating_sub(2),
    };
    (1..=free).map(|k| k as f64).product()
}

/// `ln` of [`perm_count`].
pub fn log_perm_count(n: usize, mode: EndpointMode) -> f64 {
    let free = match mode {
        EndpointMode::Free => n,
        EndpointMode::KnownEndpoints => n.saturating_sub(2),
    };
    (1..=free).map(|k| (k as f64).ln()).sum()
}

/// Advances `slice` to its lexicographic successor; false once exhausted.
fn next_permutation(slice: &mut [usize]) -> bool {
    let n = slice.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && slice[i - 1] >= slice[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while slice[j] <= slice[i - 1] {
        j -= 1;
    }
    slice.swap(i - 1, j);
    slice[i..].reverse();
    true
}

/// Calls `f` once per permutation, in lexicographic order of `tau`.
/// In known-endpoints mode only the interior positions permute.
pub(crate) fn for_each_permutation<F: FnMut(&[usize])>(
    n: usize,
    mode: EndpointMode,
    mut f: F,
) -> Result<()> {
    if n == 0 {
        return Err(NicoError::EmptyObservation);
    }
    if mode == EndpointMode::KnownEndpoints && n < 2 {
        return Err(NicoError::EndpointsNeedTwo(n));
    }
    let mut tau: Vec<usize> = (0..n).collect();
    let range = match mode {
        EndpointMode::Free => 0..n,
        EndpointMode::KnownEndpoints => 1..n - 1,
    };
    loop {
        f(&tau);
        if !next_permutation(&mut tau[range.clone()]) {
            return Ok(());
        }
    }
}

/// Streaming enumeration of permutations in lexicographic order.
///
/// Yields exactly `N!` items in `Free` mode and `(N-2)!` in
/// `KnownEndpoints` mode (with the first and last position fixed).
/// Errors when `n` exceeds `cap`.
pub fn enumerate_permutations(
    n: usize,
    mode: EndpointMode,
    cap: usize,
) -> Result<impl Iterator<Item = Permutation>> {
    if n == 0 {
        return Err(NicoError::EmptyObservation);
    }
    if mode == EndpointMode::KnownEndpoints && n < 2 {
        return Err(NicoError::EndpointsNeedTwo(n));
    }
    if n > cap {
        return Err(NicoError::EnumerationCapExceeded { n, cap });
    }
    let state = Some((0..n).collect::<Vec<usize>>());
    Ok(PermIter { state, n, mode })
}

struct PermIter {
    state: Option<Vec<usize>>,
    n: usize,
    mode: EndpointMode,
}

impl Iterator for PermIter {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.state.take()?;
        let item = Permutation::new(current.clone()).expect("enumeration yields bijections");
        let mut next = current;
        let range = match self.mode {
            EndpointMode::Free => 0..self.n,
            EndpointMode::KnownEndpoints => 1..self.n - 1,
        };
        if next_permutation(&mut next[range]) {
            self.state = Some(next);
        }
        Some(item)
    }
}

fn path_loglik_of_perm(logm: &LogModel, states: &[usize], tau: &[usize]) -> f64 {
    let mut ll = logm.log_pi[states[tau[0]]];
    for t in 1..tau.len() {
        ll += logm.log_a[[states[tau[t - 1]], states[tau[t]]]];
        if ll <= LOG_ZERO {
            return LOG_ZERO;
        }
    }
    ll.max(LOG_ZERO)
}

/// Exact sufficient statistics and exact marginal log-likelihood for one
/// observation, reusing precomputed log tables.
///
/// The gamma accumulators run in a probability domain shifted by the best
/// path log-likelihood, so long paths cannot underflow.
pub fn exact_stats_with(
    logm: &LogModel,
    obs: &Observation,
    cap: usize,
) -> Result<(SufficientStats, f64)> {
    let n = obs.len();
    if n > cap {
        return Err(NicoError::EnumerationCapExceeded { n, cap });
    }
    let states = obs.states();
    let mode = obs.mode();

    // Pass 1: best path log-likelihood, used as the accumulation shift.
    let mut max_ll = LOG_ZERO;
    for_each_permutation(n, mode, |tau| {
        let ll = path_loglik_of_perm(logm, states, tau);
        if ll > max_ll {
            max_ll = ll;
        }
    })?;
    if max_ll <= LOG_ZERO {
        return Err(NicoError::ZeroSupportObservation);
    }

    // Pass 2: shifted accumulation of the gamma quantities.
    let mut stats = SufficientStats::zeros(n);
    let mut total = 0.0_f64;
    for_each_permutation(n, mode, |tau| {
        let ll = path_loglik_of_perm(logm, states, tau);
        if ll <= LOG_ZERO {
            return;
        }
        let w = (ll - max_ll).exp();
        total += w;
        stats.r1[tau[0]] += w;
        for t in 1..n {
            stats.alpha[[tau[t], tau[t - 1]]] += w;
        }
    })?;

    stats.r1.mapv_inplace(|g| g / total);
    stats.alpha.mapv_inplace(|g| g / total);
    let log_marginal = max_ll + total.ln() - log_perm_count(n, mode);
    Ok((stats, log_marginal))
}

/// As [`exact_stats_with`], building the log tables locally.
pub fn exact_stats(
    model: &MarkovModel,
    obs: &Observation,
    cap: usize,
) -> Result<(SufficientStats, f64)> {
    exact_stats_with(&LogModel::new(model), obs, cap)
}

/// Exact marginal log-likelihood of one observation,
/// `log(sum_tau P[y|tau]) - log(#permutations)`.
pub fn exact_obs_loglik(model: &MarkovModel, obs: &Observation, cap: usize) -> Result<f64> {
    exact_stats(model, obs, cap).map(|(_, ll)| ll)
}

/// Exact posterior distribution over permutations, `P[tau | y, A, pi]`.
pub fn posterior_dist(
    model: &MarkovModel,
    obs: &Observation,
    cap: usize,
) -> Result<Vec<(Permutation, f64)>> {
    let n = obs.len();
    if n > cap {
        return Err(NicoError::EnumerationCapExceeded { n, cap });
    }
    let logm = LogModel::new(model);
    let states = obs.states();
    let mut max_ll = LOG_ZERO;
    let mut items: Vec<(Permutation, f64)> = Vec::new();
    for_each_permutation(n, obs.mode(), |tau| {
        let ll = path_loglik_of_perm(&logm, states, tau);
        if ll > max_ll {
            max_ll = ll;
        }
        items.push((Permutation::new(tau.to_vec()).unwrap(), ll));
    })?;
    if max_ll <= LOG_ZERO {
        return Err(NicoError::ZeroSupportObservation);
    }
    let mut total = 0.0;
    for (_, ll) in &mut items {
        let w = if *ll <= LOG_ZERO { 0.0 } else { (*ll - max_ll).exp() };
        *ll = w;
        total += w;
    }
    for (_, w) in &mut items {
        *w /= total;
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EndpointMode::{Free, KnownEndpoints};
    use ndarray::{arr1, arr2};

    fn two_state() -> MarkovModel {
        MarkovModel::new(
            arr1(&[0.7, 0.3]),
            arr2(&[[0.2, 0.8], [0.6, 0.4]]),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn enumeration_counts_and_order() {
        let perms: Vec<_> = enumerate_permutations(2, Free, 12)
            .unwrap()
            .map(|p| p.as_slice().to_vec())
            .collect();
        assert_eq!(perms, vec![vec![0, 1], vec![1, 0]]);

        let perms: Vec<_> = enumerate_permutations(3, KnownEndpoints, 12)
            .unwrap()
            .map(|p| p.as_slice().to_vec())
            .collect();
        assert_eq!(perms, vec![vec![0, 1, 2]]);

        let perms: Vec<_> = enumerate_permutations(4, KnownEndpoints, 12)
            .unwrap()
            .map(|p| p.as_slice().to_vec())
            .collect();
        assert_eq!(perms, vec![vec![0, 1, 2, 3], vec![0, 2, 1, 3]]);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let perms: Vec<_> = enumerate_permutations(4, Free, 12).unwrap().collect();
        assert_eq!(perms.len(), 24);
        for w in perms.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_permutations(13, Free, 12).err(),
            Some(NicoError::EnumerationCapExceeded { n: 13, cap: 12 })
        ));
    }

    #[test]
    fn symmetric_model_splits_mass_evenly() {
        let m = MarkovModel::new(
            arr1(&[0.5, 0.5]),
            arr2(&[[0.0, 1.0], [1.0, 0.0]]),
            0.0,
        )
        .unwrap();
        let obs = Observation::new(vec![0, 1], Free).unwrap();
        let (stats, _) = exact_stats(&m, &obs, 12).unwrap();
        assert!((stats.r1[0] - 0.5).abs() < 1e-15);
        assert!((stats.r1[1] - 0.5).abs() < 1e-15);
        assert!((stats.alpha[[1, 0]] - 0.5).abs() < 1e-15);
        assert!((stats.alpha[[0, 1]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_state_stats_match_hand_enumeration() {
        // Orders (0,1) and (1,0) carry 0.56 and 0.18 of unnormalized mass.
        let obs = Observation::new(vec![0, 1], Free).unwrap();
        let (stats, ll) = exact_stats(&two_state(), &obs, 12).unwrap();
        assert!((stats.r1[0] - 0.56 / 0.74).abs() < 1e-12);
        assert!((stats.r1[1] - 0.18 / 0.74).abs() < 1e-12);
        assert!((stats.alpha[[1, 0]] - 0.56 / 0.74).abs() < 1e-12);
        assert!((stats.alpha[[0, 1]] - 0.18 / 0.74).abs() < 1e-12);
        assert!((ll - (0.74f64 / 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn known_endpoints_length_three_is_deterministic() {
        let m = MarkovModel::new(
            arr1(&[0.2, 0.3, 0.5]),
            arr2(&[[0.1, 0.5, 0.4], [0.3, 0.3, 0.4], [0.25, 0.5, 0.25]]),
            0.0,
        )
        .unwrap();
        let obs = Observation::new(vec![2, 0, 1], KnownEndpoints).unwrap();
        let (stats, _) = exact_stats(&m, &obs, 12).unwrap();
        assert_eq!(stats.r1[0], 1.0);
        assert_eq!(stats.r1[1], 0.0);
        assert_eq!(stats.r1[2], 0.0);
        assert_eq!(stats.alpha[[1, 0]], 1.0);
        assert_eq!(stats.alpha[[2, 1]], 1.0);
        assert_eq!(stats.alpha.sum(), 2.0);
    }

    #[test]
    fn singleton_loglik_is_log_pi() {
        let m = two_state();
        let obs = Observation::new(vec![1], Free).unwrap();
        let ll = exact_obs_loglik(&m, &obs, 12).unwrap();
        assert!((ll - 0.3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_chain_has_single_term() {
        let m = MarkovModel::new(
            arr1(&[1.0, 0.0, 0.0]),
            arr2(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
            0.0,
        )
        .unwrap();
        let obs = Observation::new(vec![1, 2, 0], Free).unwrap();
        let ll = exact_obs_loglik(&m, &obs, 12).unwrap();
        // Only order (0,1,2) survives, with probability 1, over 3! shuffles.
        assert!((ll - (1.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_support_is_detected() {
        let m = MarkovModel::new(
            arr1(&[1.0, 0.0]),
            arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            0.0,
        )
        .unwrap();
        let obs = Observation::new(vec![0, 1], Free).unwrap();
        assert!(matches!(
            exact_stats(&m, &obs, 12),
            Err(NicoError::ZeroSupportObservation)
        ));
    }

    #[test]
    fn posterior_sums_to_one() {
        let obs = Observation::new(vec![0, 1], Free).unwrap();
        let dist = posterior_dist(&two_state(), &obs, 12).unwrap();
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(dist.len(), 2);
    }
}

//! Cross-checks of the E-step against definition-level oracles, plus
//! the sampler's distribution-level guarantees at enumerable sizes.

mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use common::{all_permutations, oracle_stats, order_prob, random_model, random_observation};
use nico_core::exact_estep::{exact_stats, posterior_dist};
use nico_core::model::{
    ordered_loglik, unshuffle, EndpointMode, Observation, Permutation,
};
use nico_core::rng::derive_rng;
use nico_core::sampler::{
    draw_causal_sample, draw_uniform_sample, empirical_perm_dist, is_stats, l1_distance,
    SampleScheme,
};

#[test]
fn exact_stats_match_posterior_oracle() {
    let mut rng = derive_rng(1001, &[0]);
    for trial in 0..60u64 {
        let n = 2 + (trial as usize % 5); // 2..=6
        let num_states = n + 1 + (trial as usize % 3);
        let model = random_model(num_states, &mut rng);
        let mode = if trial % 2 == 0 {
            EndpointMode::Free
        } else {
            EndpointMode::KnownEndpoints
        };
        let obs = random_observation(num_states, n, mode, &mut rng);
        let (stats, ll) = exact_stats(&model, &obs, 12).unwrap();
        let oracle = oracle_stats(&model, &obs);
        for t in 0..n {
            assert!(
                (stats.r1[t] - oracle.r1[t]).abs() < 1e-12,
                "trial {trial}: r1[{t}]"
            );
            for q in 0..n {
                assert!(
                    (stats.alpha[[t, q]] - oracle.alpha[t][q]).abs() < 1e-12,
                    "trial {trial}: alpha[{t},{q}]"
                );
            }
        }
        assert!((ll - oracle.log_marginal).abs() < 1e-12, "trial {trial}: marginal");
    }
}

#[test]
fn stats_structure_invariants_hold() {
    let mut rng = derive_rng(1002, &[0]);
    for trial in 0..40u64 {
        let n = 2 + (trial as usize % 5);
        let model = random_model(n + 2, &mut rng);
        let mode = if trial % 2 == 0 {
            EndpointMode::Free
        } else {
            EndpointMode::KnownEndpoints
        };
        let obs = random_observation(n + 2, n, mode, &mut rng);
        let (stats, _) = exact_stats(&model, &obs, 12).unwrap();

        let r1_sum: f64 = stats.r1.sum();
        assert!((r1_sum - 1.0).abs() < 1e-9);
        assert!((stats.alpha.sum() - (n as f64 - 1.0)).abs() < 1e-9);
        for t in 0..n {
            assert_eq!(stats.alpha[[t, t]], 0.0);
            let row: f64 = stats.alpha.row(t).sum();
            assert!((row + stats.r1[t] - 1.0).abs() < 1e-9, "row identity at {t}");
        }
    }
}

#[test]
fn known_endpoints_equal_conditioned_free_statistics() {
    // Conditioning the free posterior on tau fixing both endpoints must
    // reproduce the known-endpoints statistics exactly.
    let mut rng = derive_rng(1003, &[0]);
    for trial in 0..30u64 {
        let n = 3 + (trial as usize % 4);
        let model = random_model(n + 2, &mut rng);
        let obs_free = random_observation(n + 2, n, EndpointMode::Free, &mut rng);
        let obs_known = obs_free.with_mode(EndpointMode::KnownEndpoints).unwrap();

        let perms = all_permutations(n);
        let mut r1 = vec![0.0; n];
        let mut alpha = vec![vec![0.0; n]; n];
        let mut total = 0.0;
        for tau in perms.iter().filter(|t| t[0] == 0 && t[n - 1] == n - 1) {
            let p = order_prob(&model, obs_free.states(), tau);
            total += p;
            r1[tau[0]] += p;
            for t in 1..n {
                alpha[tau[t]][tau[t - 1]] += p;
            }
        }
        let (stats, _) = exact_stats(&model, &obs_known, 12).unwrap();
        for t in 0..n {
            assert!((stats.r1[t] - r1[t] / total).abs() < 1e-12);
            for q in 0..n {
                assert!((stats.alpha[[t, q]] - alpha[t][q] / total).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn marginal_equals_mean_over_ordered_logliks() {
    // exp(ordered_loglik) summed over all N! orders, divided by N!, equals
    // the exact marginal.
    let mut rng = derive_rng(1004, &[0]);
    for trial in 0..20u64 {
        let n = 2 + (trial as usize % 4);
        let model = random_model(n + 1, &mut rng);
        let obs = random_observation(n + 1, n, EndpointMode::Free, &mut rng);
        let mut total = 0.0;
        for tau in all_permutations(n) {
            let perm = Permutation::new(tau).unwrap();
            let z = unshuffle(&obs, &perm).unwrap();
            total += ordered_loglik(&model, &z).unwrap().exp();
        }
        let count = all_permutations(n).len() as f64;
        let expected = (total / count).ln();
        let (_, ll) = exact_stats(&model, &obs, 12).unwrap();
        assert!((ll - expected).abs() < 1e-12, "trial {trial}");
    }
}

#[test]
fn is_stats_approach_exact_stats_as_l_grows() {
    let mut rng = derive_rng(1005, &[0]);
    let model = random_model(8, &mut rng);
    let obs = random_observation(8, 6, EndpointMode::Free, &mut rng);
    let (exact, _) = exact_stats(&model, &obs, 12).unwrap();

    let mut errs = Vec::new();
    for (i, l) in [200usize, 2_000, 20_000].into_iter().enumerate() {
        let mut srng = derive_rng(1005, &[1, i as u64]);
        let (approx, _) = is_stats(&model, &obs, l, SampleScheme::Causal, &mut srng).unwrap();
        let err = approx
            .alpha
            .iter()
            .zip(exact.alpha.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[2] < errs[0], "no improvement with more samples: {errs:?}");
    assert!(errs[2] < 0.02, "residual error too large: {errs:?}");
}

#[test]
fn stat_error_is_bounded_by_l1_distance() {
    let mut rng = derive_rng(1006, &[0]);
    for trial in 0..10u64 {
        let model = random_model(7, &mut rng);
        let obs = random_observation(7, 5, EndpointMode::Free, &mut rng);
        let (exact, _) = exact_stats(&model, &obs, 12).unwrap();

        let mut srng = derive_rng(1006, &[1, trial]);
        let samples: Vec<_> = (0..500)
            .map(|_| draw_causal_sample(&model, &obs, &mut srng))
            .collect();
        let (approx, _) =
            nico_core::sampler::is_stats_from_samples(&model, &obs, SampleScheme::Causal, &samples)
                .unwrap();
        let emp = empirical_perm_dist(&samples).unwrap();
        let true_dist: HashMap<Permutation, f64> =
            posterior_dist(&model, &obs, 12).unwrap().into_iter().collect();
        let l1 = l1_distance(&true_dist, &emp);

        let linf = approx
            .alpha
            .iter()
            .zip(exact.alpha.iter())
            .map(|(a, b)| (a - b).abs())
            .chain(
                approx
                    .r1
                    .iter()
                    .zip(exact.r1.iter())
                    .map(|(a, b)| (a - b).abs()),
            )
            .fold(0.0, f64::max);
        assert!(linf <= l1 + 1e-9, "trial {trial}: linf {linf} > l1 {l1}");
    }
}

#[test]
fn uniform_proposal_covers_the_feasible_set() {
    let mut rng = derive_rng(1007, &[0]);
    let model = random_model(5, &mut rng);
    let obs = random_observation(5, 4, EndpointMode::KnownEndpoints, &mut rng);
    let mut seen = std::collections::HashSet::new();
    let mut srng = derive_rng(1007, &[1]);
    for _ in 0..500 {
        let s = draw_uniform_sample(&model, &obs, &mut srng);
        assert!(s.perm.fixes_endpoints());
        seen.insert(s.perm);
    }
    assert_eq!(seen.len(), 2); // (4-2)! = 2 interior orders
}

proptest! {
    #[test]
    fn unshuffle_roundtrips_through_inverse(
        len in 1usize..8,
        seed in 0u64..1000,
    ) {
        let mut rng = derive_rng(seed, &[2001]);
        let obs = random_observation(10, len, EndpointMode::Free, &mut rng);
        // Random tau via Fisher-Yates.
        let mut tau: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            let j = (rand::Rng::gen::<u64>(&mut rng) % (i as u64 + 1)) as usize;
            tau.swap(i, j);
        }
        let perm = Permutation::new(tau).unwrap();
        let z = unshuffle(&obs, &perm).unwrap();
        let zobs = Observation::new(z, EndpointMode::Free).unwrap();
        let back = unshuffle(&zobs, &perm.inverse()).unwrap();
        prop_assert_eq!(back, obs.states().to_vec());
    }

    #[test]
    fn empirical_distributions_are_normalized(
        len in 2usize..6,
        l in 1usize..200,
        seed in 0u64..500,
    ) {
        let mut rng = derive_rng(seed, &[2002]);
        let model = random_model(len + 1, &mut rng);
        let obs = random_observation(len + 1, len, EndpointMode::Free, &mut rng);
        let samples: Vec<_> = (0..l)
            .map(|_| draw_causal_sample(&model, &obs, &mut rng))
            .collect();
        let dist = empirical_perm_dist(&samples).unwrap();
        let total: f64 = dist.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let true_dist: HashMap<Permutation, f64> =
            posterior_dist(&model, &obs, 12).unwrap().into_iter().collect();
        let d = l1_distance(&true_dist, &dist);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
    }
}

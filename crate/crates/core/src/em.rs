//! EM / Monte Carlo EM driver: initialization, per-iteration E-step routing
//! (exact below the length cap, importance sampling above), closed-form
//! M-step, marginal log-likelihood tracking, convergence, and restarts.
//!
//! All randomness is derived from `(master_seed, purpose, restart,
//! iteration, observation)` streams, so runs are bit-reproducible no matter
//! how the observation loop is scheduled across threads.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{NicoError, Result};
use crate::exact_estep::{exact_stats_with, DEFAULT_EXACT_CAP};
use crate::model::{
    EndpointMode, LogModel, MarkovModel, Observation, SufficientStats,
};
use crate::mstep::{self, DirichletPriors};
use crate::rng::{derive_rng, purpose};
use crate::sampler::{is_stats, SampleScheme};

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Relative log-likelihood change treated as converged.
    pub tol: f64,
    /// Iterations that must meet `tol` consecutively before stopping.
    pub consecutive_hits: usize,
    /// Longest observation handled by exact enumeration.
    pub exact_cap: usize,
    /// Importance samples per observation for longer paths.
    pub samples_per_obs: usize,
    pub scheme: SampleScheme,
    pub restarts: usize,
    pub master_seed: u64,
    pub theta_min: f64,
    pub priors: Option<DirichletPriors>,
    /// Overrides the endpoint mode recorded in the observations.
    pub endpoint_override: Option<EndpointMode>,
    /// Additional samples per iteration: `L_k = L * (1 + ramp * k)`.
    pub sample_ramp: f64,
    /// Multiplier on `samples_per_obs` for restart-ranking log-likelihoods.
    pub rank_sample_factor: usize,
    /// Retain each iterate's model in the trace.
    pub keep_iterates: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            consecutive_hits: 3,
            exact_cap: DEFAULT_EXACT_CAP,
            samples_per_obs: 2000,
            scheme: SampleScheme::Causal,
            restarts: 10,
            master_seed: 42,
            theta_min: 1e-12,
            priors: None,
            endpoint_override: None,
            sample_ramp: 0.0,
            rank_sample_factor: 5,
            keep_iterates: false,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(NicoError::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(NicoError::InvalidParameter("tol must be positive".into()));
        }
        if self.consecutive_hits < 1 {
            return Err(NicoError::InvalidParameter(
                "consecutive_hits must be >= 1".into(),
            ));
        }
        if self.samples_per_obs < 1 {
            return Err(NicoError::InvalidParameter(
                "samples_per_obs must be >= 1".into(),
            ));
        }
        if self.restarts < 1 {
            return Err(NicoError::InvalidParameter("restarts must be >= 1".into()));
        }
        Ok(())
    }

    fn samples_at_iteration(&self, iter: usize) -> usize {
        let l = self.samples_per_obs as f64 * (1.0 + self.sample_ramp * iter as f64);
        (l.round() as usize).max(1)
    }
}

/// Per-iteration trace record.
#[derive(Debug, Clone)]
pub struct IterRecord {
    /// Marginal log-likelihood of the model entering the iteration.
    pub loglik: f64,
    /// `Q(new; old)` after the M-step; `NaN` on the stopping iteration.
    pub q_value: f64,
    /// Smallest effective sample size across sampled observations.
    pub ess_min: Option<f64>,
    /// Zero-weight samples across all observations this iteration.
    pub zero_weight_samples: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EmTrace {
    pub iterations: Vec<IterRecord>,
    pub converged: bool,
    /// Iterations whose marginal log-likelihood dropped below the previous
    /// one by more than 1e-10 (expected only for sampled E-steps).
    pub non_monotone_iters: usize,
    /// Models entering each iteration, retained when configured.
    pub iterate_models: Vec<MarkovModel>,
}

fn apply_endpoint_override(
    observations: &[Observation],
    config: &EmConfig,
) -> Result<Vec<Observation>> {
    match config.endpoint_override {
        None => Ok(observations.to_vec()),
        Some(mode) => observations.iter().map(|o| o.with_mode(mode)).collect(),
    }
}

/// Spread of the multiplicative jitter around the uniform init weight.
const INIT_JITTER: f64 = 0.25;

/// Random initialization: `pi` positive on observed states, row `i` of `A`
/// positive exactly on states co-occurring with `i`, both floored.
///
/// Weights are uniform with multiplicative jitter rather than fully random
/// points on the simplex: starting near the support centroid lets the first
/// E-step see co-occurrence counts instead of an arbitrary order
/// preference, which restarts then sharpen in different directions.
pub fn init_model(
    observations: &[Observation],
    num_states: usize,
    theta_min: f64,
    rng: &mut impl rand::Rng,
) -> Result<MarkovModel> {
    if observations.is_empty() {
        return Err(NicoError::NoObservations);
    }
    let mut observed = vec![false; num_states];
    let mut co = vec![std::collections::BTreeSet::new(); num_states];
    for obs in observations {
        for &i in obs.states() {
            observed[i] = true;
            for &j in obs.states() {
                if i != j {
                    co[i].insert(j);
                }
            }
        }
    }
    let jitter = |rng: &mut dyn rand::RngCore| {
        1.0 - INIT_JITTER / 2.0 + INIT_JITTER * rand::Rng::gen::<f64>(rng)
    };

    let mut pi = ndarray::Array1::zeros(num_states);
    let mut total = 0.0;
    for i in 0..num_states {
        if observed[i] {
            let v = jitter(rng);
            pi[i] = v;
            total += v;
        }
    }
    pi.mapv_inplace(|v| v / total);

    let mut a = ndarray::Array2::zeros((num_states, num_states));
    for i in 0..num_states {
        if co[i].is_empty() {
            a.row_mut(i).fill(1.0 / num_states as f64);
            continue;
        }
        let mut row_sum = 0.0;
        for &j in &co[i] {
            let v = jitter(rng);
            a[[i, j]] = v;
            row_sum += v;
        }
        for &j in &co[i] {
            a[[i, j]] /= row_sum;
        }
    }

    let mut model = MarkovModel::new(pi, a, 0.0)?;
    mstep::floor_model(&mut model, theta_min);
    Ok(model)
}

#[derive(Debug)]
struct ObsEstep {
    stats: SufficientStats,
    loglik: f64,
    ess: Option<f64>,
    zero_weights: usize,
}

fn estep_one(
    model: &MarkovModel,
    logm: &LogModel,
    obs: &Observation,
    config: &EmConfig,
    restart: u64,
    iter: usize,
    obs_idx: usize,
) -> Result<ObsEstep> {
    if obs.len() <= config.exact_cap {
        let (stats, loglik) = exact_stats_with(logm, obs, config.exact_cap)?;
        Ok(ObsEstep {
            stats,
            loglik,
            ess: None,
            zero_weights: 0,
        })
    } else {
        let mut rng = derive_rng(
            config.master_seed,
            &[purpose::ESTEP, restart, iter as u64, obs_idx as u64],
        );
        let l = config.samples_at_iteration(iter);
        let (stats, diag) = is_stats(model, obs, l, config.scheme, &mut rng)?;
        Ok(ObsEstep {
            stats,
            loglik: diag.log_marginal,
            ess: Some(diag.ess),
            zero_weights: diag.zero_weight_count,
        })
    }
}

fn estep_all(
    model: &MarkovModel,
    observations: &[Observation],
    config: &EmConfig,
    restart: u64,
    iter: usize,
) -> Result<Vec<ObsEstep>> {
    let logm = LogModel::new(model);
    observations
        .par_iter()
        .enumerate()
        .map(|(idx, obs)| {
            estep_one(model, &logm, obs, config, restart, iter, idx).map_err(|e| {
                NicoError::EstepFailed {
                    index: idx,
                    source: Box::new(e),
                }
            })
        })
        .collect()
}

/// Marginal log-likelihood of the observation set: exact for observations
/// within the enumeration cap, importance-sampling estimate (with the
/// dedicated ranking budget) otherwise. Deterministic given the seed.
pub fn marginal_loglik(
    model: &MarkovModel,
    observations: &[Observation],
    config: &EmConfig,
) -> Result<f64> {
    marginal_loglik_salted(model, observations, config, 0)
}

fn marginal_loglik_salted(
    model: &MarkovModel,
    observations: &[Observation],
    config: &EmConfig,
    salt: u64,
) -> Result<f64> {
    let observations = apply_endpoint_override(observations, config)?;
    let logm = LogModel::new(model);
    let l = config.samples_per_obs * config.rank_sample_factor.max(1);
    let parts: Vec<f64> = observations
        .par_iter()
        .enumerate()
        .map(|(idx, obs)| -> Result<f64> {
            if obs.len() <= config.exact_cap {
                let (_, ll) = exact_stats_with(&logm, obs, config.exact_cap)?;
                Ok(ll)
            } else {
                let mut rng = derive_rng(
                    config.master_seed,
                    &[purpose::RANK, salt, idx as u64],
                );
                let (_, diag) = is_stats(model, obs, l, config.scheme, &mut rng)?;
                Ok(diag.log_marginal)
            }
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// Runs EM from one random initialization (`restart` selects the stream).
pub fn run_em_restart(
    observations: &[Observation],
    num_states: usize,
    config: &EmConfig,
    restart: u64,
) -> Result<(MarkovModel, EmTrace)> {
    config.validate()?;
    let observations = apply_endpoint_override(observations, config)?;
    if observations.is_empty() {
        return Err(NicoError::NoObservations);
    }

    let all_known = observations
        .iter()
        .all(|o| o.mode() == EndpointMode::KnownEndpoints);
    // With known endpoints pi is the empirical source frequency, held
    // fixed; EM then only updates the transition matrix.
    let fixed_pi = if all_known {
        let mut pi = mstep::known_endpoint_pi(&observations, num_states)?;
        if config.theta_min > 0.0 {
            mstep::floor_distribution(&mut pi, config.theta_min);
        }
        Some(pi)
    } else {
        None
    };

    let mut init_rng = derive_rng(config.master_seed, &[purpose::INIT, restart]);
    let mut model = init_model(&observations, num_states, config.theta_min, &mut init_rng)?;
    if let Some(pi) = &fixed_pi {
        model.pi = pi.clone();
    }

    let mut trace = EmTrace::default();
    let mut prev_ll: Option<f64> = None;
    let mut hits = 0usize;

    for iter in 0..config.max_iters {
        let started = Instant::now();
        if config.keep_iterates {
            trace.iterate_models.push(model.clone());
        }
        let parts = estep_all(&model, &observations, config, restart, iter)?;
        let loglik: f64 = parts.iter().map(|p| p.loglik).sum();
        let ess_min = parts
            .iter()
            .filter_map(|p| p.ess)
            .min_by(|a, b| a.partial_cmp(b).unwrap());
        let zero_weight_samples = parts.iter().map(|p| p.zero_weights).sum();

        if let Some(prev) = prev_ll {
            if loglik < prev - 1e-10 {
                trace.non_monotone_iters += 1;
            }
            let rel = (loglik - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < config.tol {
                hits += 1;
            } else {
                hits = 0;
            }
        }
        prev_ll = Some(loglik);

        if hits >= config.consecutive_hits {
            trace.converged = true;
            trace.iterations.push(IterRecord {
                loglik,
                q_value: f64::NAN,
                ess_min,
                zero_weight_samples,
                seconds: started.elapsed().as_secs_f64(),
            });
            break;
        }

        let stats: Vec<SufficientStats> = parts.into_iter().map(|p| p.stats).collect();
        let mut updated = match &config.priors {
            Some(priors) => mstep::map_update(&stats, &observations, priors, num_states)?,
            None => mstep::ml_update(&stats, &observations, num_states)?,
        };
        if let Some(pi) = &fixed_pi {
            updated.pi = pi.clone();
        }
        mstep::floor_model(&mut updated, config.theta_min);
        let q = mstep::q_value(&stats, &observations, &updated);
        model = updated;

        trace.iterations.push(IterRecord {
            loglik,
            q_value: q,
            ess_min,
            zero_weight_samples,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok((model, trace))
}

/// Runs EM with the configuration's first restart stream.
pub fn run_em(
    observations: &[Observation],
    num_states: usize,
    config: &EmConfig,
) -> Result<(MarkovModel, EmTrace)> {
    run_em_restart(observations, num_states, config, 0)
}

/// Outcome of a multi-restart run.
#[derive(Debug, Clone)]
pub struct RestartsOutcome {
    pub best_model: MarkovModel,
    pub best_restart: usize,
    /// Ranking marginal log-likelihood of the winning restart.
    pub best_loglik: f64,
    /// Final models of every restart, in restart order.
    pub models: Vec<MarkovModel>,
    /// Ranking log-likelihood per restart.
    pub logliks: Vec<f64>,
    pub traces: Vec<EmTrace>,
}

/// Runs all restarts and keeps the model with the highest ranking marginal
/// log-likelihood.
pub fn run_restarts(
    observations: &[Observation],
    num_states: usize,
    config: &EmConfig,
) -> Result<RestartsOutcome> {
    config.validate()?;
    let runs: Vec<(MarkovModel, EmTrace)> = (0..config.restarts as u64)
        .into_par_iter()
        .map(|restart| run_em_restart(observations, num_states, config, restart))
        .collect::<Result<_>>()?;

    let mut models = Vec::with_capacity(runs.len());
    let mut traces = Vec::with_capacity(runs.len());
    for (m, t) in runs {
        models.push(m);
        traces.push(t);
    }
    let logliks: Vec<f64> = models
        .par_iter()
        .enumerate()
        .map(|(r, m)| marginal_loglik_salted(m, observations, config, r as u64))
        .collect::<Result<_>>()?;

    let mut best = 0usize;
    for r in 1..logliks.len() {
        if logliks[r] > logliks[best] {
            best = r;
        }
    }
    Ok(RestartsOutcome {
        best_model: models[best].clone(),
        best_restart: best,
        best_loglik: logliks[best],
        models,
        logliks,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EndpointMode::{Free, KnownEndpoints};
    use crate::model::{validate_model, Observation};
    use crate::rng::derive_rng;

    fn obs(states: Vec<usize>, mode: EndpointMode) -> Observation {
        Observation::new(states, mode).unwrap()
    }

    #[test]
    fn init_supports_exactly_cooccurring_pairs() {
        let observations = vec![obs(vec![0, 1], Free), obs(vec![2, 3], Free)];
        let mut rng = derive_rng(5, &[purpose::INIT]);
        let theta = 1e-6;
        let m = init_model(&observations, 4, theta, &mut rng).unwrap();
        assert!(m.a[[0, 1]] > theta);
        assert!(m.a[[1, 0]] > theta);
        assert_eq!(m.a[[0, 2]], theta);
        assert!(validate_model(&m).is_empty());
    }

    #[test]
    fn init_is_deterministic_per_stream() {
        let observations = vec![obs(vec![0, 1, 2], Free)];
        let mut r1 = derive_rng(9, &[purpose::INIT, 0]);
        let mut r2 = derive_rng(9, &[purpose::INIT, 0]);
        let a = init_model(&observations, 3, 1e-9, &mut r1).unwrap();
        let b = init_model(&observations, 3, 1e-9, &mut r2).unwrap();
        assert_eq!(a.pi, b.pi);
        assert_eq!(a.a, b.a);
    }

    #[test]
    fn marginal_loglik_is_additive_and_exact() {
        let config = EmConfig::default();
        let model = MarkovModel::new(
            ndarray::arr1(&[0.7, 0.3]),
            ndarray::arr2(&[[0.2, 0.8], [0.6, 0.4]]),
            0.0,
        )
        .unwrap();
        let o1 = vec![obs(vec![0, 1], Free)];
        let both = vec![obs(vec![0, 1], Free), obs(vec![0, 1], Free)];
        let l1 = marginal_loglik(&model, &o1, &config).unwrap();
        let l2 = marginal_loglik(&model, &both, &config).unwrap();
        assert!((l1 - 0.37f64.ln()).abs() < 1e-12);
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
    }

    #[test]
    fn exact_em_is_monotone_on_small_instance() {
        let observations = vec![
            obs(vec![0, 1, 2], Free),
            obs(vec![1, 2, 3], Free),
            obs(vec![0, 3], Free),
            obs(vec![2, 3], Free),
        ];
        let config = EmConfig {
            max_iters: 60,
            restarts: 1,
            theta_min: 1e-12,
            ..EmConfig::default()
        };
        let (model, trace) = run_em(&observations, 4, &config).unwrap();
        assert!(validate_model(&model).is_empty());
        assert_eq!(trace.non_monotone_iters, 0);
        for w in trace.iterations.windows(2) {
            assert!(w[1].loglik >= w[0].loglik - 1e-10);
        }
    }

    #[test]
    fn known_endpoints_pair_converges_immediately() {
        let observations = vec![obs(vec![0, 1], KnownEndpoints)];
        let config = EmConfig {
            restarts: 1,
            ..EmConfig::default()
        };
        let (model, trace) = run_em(&observations, 2, &config).unwrap();
        assert!(trace.converged);
        // Unique solution: starts at 0, moves to 1.
        assert!(model.pi[0] > 0.999);
        assert!(model.a[[0, 1]] > 0.999);
        assert!(trace.iterations.len() <= config.consecutive_hits + 2);
    }

    #[test]
    fn runs_are_bit_identical_for_equal_config() {
        let observations = vec![
            obs(vec![0, 1, 2], Free),
            obs(vec![2, 3], Free),
            obs(vec![1, 3, 0], Free),
        ];
        let config = EmConfig {
            max_iters: 15,
            restarts: 2,
            ..EmConfig::default()
        };
        let a = run_restarts(&observations, 4, &config).unwrap();
        let b = run_restarts(&observations, 4, &config).unwrap();
        assert_eq!(a.best_restart, b.best_restart);
        assert_eq!(a.best_model.pi, b.best_model.pi);
        assert_eq!(a.best_model.a, b.best_model.a);
        assert_eq!(a.logliks, b.logliks);
        let ta: Vec<f64> = a.traces[0].iterations.iter().map(|r| r.loglik).collect();
        let tb: Vec<f64> = b.traces[0].iterations.iter().map(|r| r.loglik).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn restart_selection_takes_the_argmax() {
        let observations = vec![
            obs(vec![0, 1, 2, 3], Free),
            obs(vec![1, 2, 4], Free),
            obs(vec![0, 4], Free),
            obs(vec![3, 4, 1], Free),
        ];
        let config = EmConfig {
            max_iters: 25,
            restarts: 4,
            ..EmConfig::default()
        };
        let outcome = run_restarts(&observations, 5, &config).unwrap();
        for (r, ll) in outcome.logliks.iter().enumerate() {
            assert!(
                outcome.best_loglik >= *ll,
                "restart {r} beat the selected one"
            );
        }
        // Single restart degenerates to run_em.
        let single = EmConfig {
            restarts: 1,
            ..config
        };
        let one = run_restarts(&observations, 5, &single).unwrap();
        let (direct, _) = run_em(&observations, 5, &single).unwrap();
        assert_eq!(one.best_model.a, direct.a);
    }

    #[test]
    fn fixed_point_after_convergence() {
        let observations = vec![
            obs(vec![0, 1], Free),
            obs(vec![1, 2], Free),
            obs(vec![0, 2], Free),
        ];
        let config = EmConfig {
            max_iters: 200,
            tol: 1e-9,
            restarts: 1,
            ..EmConfig::default()
        };
        let (model, trace) = run_em(&observations, 3, &config).unwrap();
        assert!(trace.converged);
        // One more exact EM step moves parameters by < 10 * tol.
        let logm = LogModel::new(&model);
        let stats: Vec<SufficientStats> = observations
            .iter()
            .map(|o| exact_stats_with(&logm, o, 12).unwrap().0)
            .collect();
        let mut next = mstep::ml_update(&stats, &observations, 3).unwrap();
        mstep::floor_model(&mut next, config.theta_min);
        let max_delta = model
            .a
            .iter()
            .zip(next.a.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_delta < 10.0 * config.tol, "drift {max_delta}");
    }

    #[test]
    fn estep_error_carries_observation_index() {
        // Second observation has zero support: pi mass only on state 0 and
        // the observation omits state 0, with theta_min = 0.
        let observations = vec![obs(vec![0, 1], Free), obs(vec![1, 2], Free)];
        let config = EmConfig {
            theta_min: 0.0,
            restarts: 1,
            ..EmConfig::default()
        };
        // Force a model whose support excludes the second observation.
        let model = MarkovModel::new(
            ndarray::arr1(&[1.0, 0.0, 0.0]),
            ndarray::arr2(&[
                [0.0, 1.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0],
            ]),
            0.0,
        )
        .unwrap();
        let logm = LogModel::new(&model);
        let err = estep_all(&model, &observations, &config, 0, 0).unwrap_err();
        match err {
            NicoError::EstepFailed { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
        drop(logm);
    }
}

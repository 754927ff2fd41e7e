//! Monte Carlo E-step: causal sequential importance sampler, uniform
//! baseline, weighted sufficient statistics, distribution diagnostics, and
//! the sample-size calculators behind the probably-monotone guarantees.
//!
//! The causal sampler grows an ordering step by step: the first position is
//! drawn from `pi` restricted to the observed vertices, each following
//! position from the current row of `A` restricted to unused positions.
//! The importance weight is the product of the restricted-distribution
//! normalizers accumulated along the way, so `weight * proposal = target`
//! holds exactly for every sample.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NicoError, Result};
use crate::exact_estep::{for_each_permutation, log_perm_count};
use crate::model::{
    safe_ln, EndpointMode, LogModel, MarkovModel, Observation, Permutation, SufficientStats,
    LOG_ZERO,
};

/// Proposal used for the Monte Carlo E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleScheme {
    Causal,
    Uniform,
}

impl std::fmt::Display for SampleScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleScheme::Causal => write!(f, "causal"),
            SampleScheme::Uniform => write!(f, "uniform"),
        }
    }
}

/// One sampled permutation with its importance weight.
///
/// `log_weight` is authoritative; [`PermutationSample::weight`] is its
/// exponential and is zero exactly when the unshuffled order has zero
/// probability under the model.
#[derive(Debug, Clone)]
pub struct PermutationSample {
    pub perm: Permutation,
    pub log_weight: f64,
    pub log_target_unnorm: f64,
}

impl PermutationSample {
    pub fn weight(&self) -> f64 {
        if self.log_weight <= LOG_ZERO {
            0.0
        } else {
            self.log_weight.exp()
        }
    }
}

/// Draws one index from `weights` (must sum to `total > 0`).
fn weighted_pick<R: Rng + ?Sized>(weights: &[(usize, f64)], total: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for &(idx, w) in weights {
        acc += w;
        if u < acc {
            return idx;
        }
    }
    weights.last().expect("nonempty weights").0
}

/// Completes a dead-ended draw into a valid permutation by appending the
/// remaining positions in ascending order.
fn complete_ascending(tau: &mut Vec<usize>, avail: &[bool], reserved_last: Option<usize>) {
    for (t, &free) in avail.iter().enumerate() {
        if free && Some(t) != reserved_last {
            tau.push(t);
        }
    }
    if let Some(last) = reserved_last {
        tau.push(last);
    }
}

/// Causal sequential importance sample for one observation.
///
/// Dead ends (no available position with positive transition mass) return a
/// completed permutation with zero weight.
pub fn draw_causal_sample<R: Rng + ?Sized>(
    model: &MarkovModel,
    obs: &Observation,
    rng: &mut R,
) -> PermutationSample {
    let n = obs.len();
    let states = obs.states();
    let mut avail = vec![true; n];
    let mut tau: Vec<usize> = Vec::with_capacity(n);
    let mut buf: Vec<(usize, f64)> = Vec::with_capacity(n);

    let (mut log_weight, mut log_target, reserved_last, interior_end);
    match obs.mode() {
        EndpointMode::Free => {
            // First position from pi restricted to the observed vertices.
            buf.clear();
            let mut total = 0.0;
            for (t, &s) in states.iter().enumerate() {
                let w = model.pi[s];
                if w > 0.0 {
                    buf.push((t, w));
                    total += w;
                }
            }
            if total <= 0.0 {
                complete_ascending(&mut tau, &avail, None);
                let perm = Permutation::new(tau).expect("completion is a bijection");
                return PermutationSample {
                    perm,
                    log_weight: LOG_ZERO,
                    log_target_unnorm: LOG_ZERO,
                };
            }
            let t0 = weighted_pick(&buf, total, rng);
            tau.push(t0);
            avail[t0] = false;
            log_weight = 0.0;
            log_target = safe_ln(model.pi[states[t0]]);
            reserved_last = None;
            interior_end = n;
        }
        EndpointMode::KnownEndpoints => {
            // tau_1 = 1 and tau_N = N are fixed; the chain starts at the
            // source and position N stays reserved until the final step.
            tau.push(0);
            avail[0] = false;
            avail[n - 1] = false;
            log_weight = safe_ln(model.pi[states[0]]);
            log_target = safe_ln(model.pi[states[0]]);
            reserved_last = Some(n - 1);
            interior_end = n - 1;
        }
    }

    for _ in tau.len()..interior_end {
        let prev = states[*tau.last().unwrap()];
        buf.clear();
        let mut total = 0.0;
        for (t, &s) in states.iter().enumerate() {
            if avail[t] {
                let w = model.a[[prev, s]];
                if w > 0.0 {
                    buf.push((t, w));
                    total += w;
                }
            }
        }
        if total <= 0.0 {
            complete_ascending(&mut tau, &avail, reserved_last);
            let perm = Permutation::new(tau).expect("completion is a bijection");
            return PermutationSample {
                perm,
                log_weight: LOG_ZERO,
                log_target_unnorm: LOG_ZERO,
            };
        }
        let t = weighted_pick(&buf, total, rng);
        tau.push(t);
        avail[t] = false;
        log_weight += total.ln();
        log_target += safe_ln(model.a[[prev, states[t]]]);
    }

    if obs.mode() == EndpointMode::KnownEndpoints {
        let prev = states[*tau.last().unwrap()];
        let hop = safe_ln(model.a[[prev, states[n - 1]]]);
        tau.push(n - 1);
        log_weight += hop;
        log_target += hop;
    }

    let log_weight = log_weight.max(LOG_ZERO);
    let log_target = log_target.max(LOG_ZERO);
    PermutationSample {
        perm: Permutation::new(tau).expect("draw yields a bijection"),
        log_weight: if log_target <= LOG_ZERO { LOG_ZERO } else { log_weight },
        log_target_unnorm: log_target,
    }
}

/// Uniform-proposal baseline: the permutation is uniform over the feasible
/// set and the weight is the unnormalized target itself.
pub fn draw_uniform_sample<R: Rng + ?Sized>(
    model: &MarkovModel,
    obs: &Observation,
    rng: &mut R,
) -> PermutationSample {
    let n = obs.len();
    let mut tau: Vec<usize> = (0..n).collect();
    match obs.mode() {
        EndpointMode::Free => {
            // Fisher-Yates.
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
    let states = obs.states();
    let mut log_target = safe_ln(model.pi[states[tau[0]]]);
    for t in 1..n {
        log_target += safe_ln(model.a[[states[tau[t - 1]], states[tau[t]]]]);
    }
    let log_target = log_target.max(LOG_ZERO);
    PermutationSample {
        perm: Permutation::new(tau).expect("shuffle yields a bijection"),
        log_weight: log_target,
        log_target_unnorm: log_target,
    }
}

/// Exact probability that the causal scheme outputs `tau` without dead
/// ends: the product of the masked, normalized step distributions.
pub fn causal_proposal_prob(model: &MarkovModel, obs: &Observation, perm: &Permutation) -> f64 {
    let n = obs.len();
    if perm.len() != n {
        return 0.0;
    }
    let states = obs.states();
    let tau = perm.as_slice();
    let mut avail = vec![true; n];
    let mut prob = 1.0;
    let interior_end;
    match obs.mode() {
        EndpointMode::Free => {
            let s_pi: f64 = states.iter().map(|&s| model.pi[s]).sum();
            let num = model.pi[states[tau[0]]];
            if s_pi <= 0.0 || num <= 0.0 {
                return 0.0;
            }
            prob = num / s_pi;
            avail[tau[0]] = false;
            interior_end = n;
        }
        EndpointMode::KnownEndpoints => {
            if !perm.fixes_endpoints() {
                return 0.0;
            }
            avail[0] = false;
            avail[n - 1] = false;
            interior_end = n - 1;
        }
    }
    for i in 1..interior_end {
        let prev = states[tau[i - 1]];
        let denom: f64 = states
            .iter()
            .enumerate()
            .filter(|&(t, _)| avail[t])
            .map(|(_, &s)| model.a[[prev, s]])
            .sum();
        let num = model.a[[prev, states[tau[i]]]];
        if num <= 0.0 || denom <= 0.0 {
            return 0.0;
        }
        prob *= num / denom;
        avail[tau[i]] = false;
    }
    prob
}

/// Monte Carlo E-step diagnostics.
#[derive(Debug, Clone)]
pub struct IsDiagnostics {
    /// Effective sample size, `(sum z)^2 / sum z^2`.
    pub ess: f64,
    /// Samples whose weight is exactly zero (dead ends included).
    pub zero_weight_count: usize,
    /// Self-normalized estimate of the observation's marginal log-likelihood.
    pub log_marginal: f64,
}

fn log_mean_exp(logs: impl Iterator<Item = f64>, count: usize) -> f64 {
    let vals: Vec<f64> = logs.collect();
    let max = vals.iter().cloned().fold(LOG_ZERO, f64::max);
    if max <= LOG_ZERO {
        return LOG_ZERO;
    }
    let sum: f64 = vals
        .iter()
        .map(|&l| if l <= LOG_ZERO { 0.0 } else { (l - max).exp() })
        .sum();
    max + (sum / count as f64).ln()
}

/// Draws `l` samples under `scheme` and returns importance-weighted
/// sufficient statistics with diagnostics.
pub fn is_stats<R: Rng + ?Sized>(
    model: &MarkovModel,
    obs: &Observation,
    l: usize,
    scheme: SampleScheme,
    rng: &mut R,
) -> Result<(SufficientStats, IsDiagnostics)> {
    if l == 0 {
        return Err(NicoError::InvalidParameter("sample count must be >= 1".into()));
    }
    let samples: Vec<PermutationSample> = (0..l)
        .map(|_| match scheme {
            SampleScheme::Causal => draw_causal_sample(model, obs, rng),
            SampleScheme::Uniform => draw_uniform_sample(model, obs, rng),
        })
        .collect();
    is_stats_from_samples(model, obs, scheme, &samples)
}

/// Statistics and diagnostics from an existing batch of samples.
pub fn is_stats_from_samples(
    model: &MarkovModel,
    obs: &Observation,
    scheme: SampleScheme,
    samples: &[PermutationSample],
) -> Result<(SufficientStats, IsDiagnostics)> {
    let n = obs.len();
    let l = samples.len();
    let max_lw = samples
        .iter()
        .map(|s| s.log_weight)
        .fold(LOG_ZERO, f64::max);
    if max_lw <= LOG_ZERO {
        return Err(NicoError::AllWeightsZero(l));
    }

    let mut stats = SufficientStats::zeros(n);
    let mut sum_z = 0.0;
    let mut sum_z2 = 0.0;
    let mut zero_weight_count = 0;
    for s in samples {
        if s.log_weight <= LOG_ZERO {
            zero_weight_count += 1;
            continue;
        }
        let z = (s.log_weight - max_lw).exp();
        sum_z += z;
        sum_z2 += z * z;
        let tau = s.perm.as_slice();
        stats.r1[tau[0]] += z;
        for t in 1..n {
            stats.alpha[[tau[t], tau[t - 1]]] += z;
        }
    }
    stats.r1.mapv_inplace(|g| g / sum_z);
    stats.alpha.mapv_inplace(|g| g / sum_z);

    // Fully normalized mean weight: E[.] recovers sum_tau P[y|tau], so
    // dividing by the permutation count gives the marginal.
    let lme = log_mean_exp(samples.iter().map(|s| s.log_weight), l);
    let log_marginal = match scheme {
        SampleScheme::Causal => {
            let first_norm = match obs.mode() {
                EndpointMode::Free => {
                    let s_pi: f64 = obs.states().iter().map(|&s| model.pi[s]).sum();
                    safe_ln(s_pi)
                }
                EndpointMode::KnownEndpoints => 0.0,
            };
            lme + first_norm - log_perm_count(n, obs.mode())
        }
        // The uniform proposal already divides by the permutation count.
        SampleScheme::Uniform => lme,
    };

    Ok((
        stats,
        IsDiagnostics {
            ess: sum_z * sum_z / sum_z2,
            zero_weight_count,
            log_marginal,
        },
    ))
}

/// Weight-normalized empirical distribution over sampled permutations.
pub fn empirical_perm_dist(samples: &[PermutationSample]) -> Result<HashMap<Permutation, f64>> {
    let max_lw = samples
        .iter()
        .map(|s| s.log_weight)
        .fold(LOG_ZERO, f64::max);
    if max_lw <= LOG_ZERO {
        return Err(NicoError::NoPositiveWeight);
    }
    let mut dist: HashMap<Permutation, f64> = HashMap::new();
    let mut total = 0.0;
    for s in samples {
        if s.log_weight <= LOG_ZERO {
            continue;
        }
        let z = (s.log_weight - max_lw).exp();
        *dist.entry(s.perm.clone()).or_insert(0.0) += z;
        total += z;
    }
    for w in dist.values_mut() {
        *w /= total;
    }
    Ok(dist)
}

/// `l1` distance between two distributions on permutations; in `[0, 2]`.
pub fn l1_distance(p: &HashMap<Permutation, f64>, q: &HashMap<Permutation, f64>) -> f64 {
    let mut d = 0.0;
    for (perm, &pw) in p {
        d += (pw - q.get(perm).copied().unwrap_or(0.0)).abs();
    }
    for (perm, &qw) in q {
        if !p.contains_key(perm) {
            d += qw.abs();
        }
    }
    d
}

/// Exact worst-case posterior/proposal ratio `b_m` over all permutations,
/// with the convention `0/0 = 0`. Enumerates, so the cap applies.
pub fn compute_bm(model: &MarkovModel, obs: &Observation, cap: usize) -> Result<f64> {
    let n = obs.len();
    if n > cap {
        return Err(NicoError::EnumerationCapExceeded { n, cap });
    }
    let logm = LogModel::new(model);
    let states = obs.states();
    let mode = obs.mode();

    let mut max_ll = LOG_ZERO;
    for_each_permutation(n, mode, |tau| {
        let mut ll = logm.log_pi[states[tau[0]]];
        for t in 1..n {
            ll += logm.log_a[[states[tau[t - 1]], states[tau[t]]]];
        }
        if ll > max_ll {
            max_ll = ll;
        }
    })?;
    if max_ll <= LOG_ZERO {
        return Err(NicoError::ZeroSupportObservation);
    }

    let mut total = 0.0;
    for_each_permutation(n, mode, |tau| {
        let mut ll = logm.log_pi[states[tau[0]]];
        for t in 1..n {
            ll += logm.log_a[[states[tau[t - 1]], states[tau[t]]]];
        }
        if ll > LOG_ZERO {
            total += (ll - max_ll).exp();
        }
    })?;

    let mut b = 0.0_f64;
    for_each_permutation(n, mode, |tau| {
        let mut ll = logm.log_pi[states[tau[0]]];
        for t in 1..n {
            ll += logm.log_a[[states[tau[t - 1]], states[tau[t]]]];
        }
        if ll <= LOG_ZERO {
            return; // P = 0; convention 0/0 = 0
        }
        let p = (ll - max_ll).exp() / total;
        let perm = Permutation::new(tau.to_vec()).unwrap();
        let r = causal_proposal_prob(model, obs, &perm);
        if r > 0.0 {
            b = b.max(p / r);
        }
    })?;
    Ok(b)
}

/// Inputs for the sample-size bounds: per-observation lengths and weight
/// ratio bounds plus the scalar assumptions of the two theorems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Per-observation lengths `N_m`.
    pub lengths: Vec<u32>,
    /// Per-observation weight-ratio bounds `b_m`.
    pub b: Vec<f64>,
    pub theta_min: f64,
    pub lambda: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// `Delta(theta*)`, unobservable in practice; supplied by the user.
    pub delta_star: f64,
}

impl BoundInputs {
    pub fn num_observations(&self) -> usize {
        self.lengths.len()
    }

    fn validate_common(&self, m: usize) -> Result<()> {
        if self.lengths.is_empty() || self.lengths.len() != self.b.len() {
            return Err(NicoError::InvalidParameter(
                "lengths and b must be nonempty and equally long".into(),
            ));
        }
        if m >= self.lengths.len() {
            return Err(NicoError::InvalidParameter(format!(
                "observation index {m} out of range for {} observations",
                self.lengths.len()
            )));
        }
        if self.lengths.iter().any(|&n| n == 0) {
            return Err(NicoError::InvalidParameter("every N_m must be >= 1".into()));
        }
        if self.b.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(NicoError::InvalidParameter("every b_m must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(NicoError::InvalidParameter("delta must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

fn ceil_to_u64(raw: f64) -> Result<u64> {
    if !raw.is_finite() || raw < 0.0 || raw >= u64::MAX as f64 {
        return Err(NicoError::InvalidParameter(format!(
            "sample size {raw:e} is not representable"
        )));
    }
    Ok(raw.ceil() as u64)
}

/// Per-observation sample count for a probably-approximately-monotone
/// update:
/// `L_m = (2 T^2 N_m^4 b_m^2 |log theta_min|^2 / eps^2)
///        * log(2 N_m^2 / (1 - (1-delta)^(1/T)))`, rounded up.
pub fn pam_sample_size(inputs: &BoundInputs, m: usize) -> Result<u64> {
    inputs.validate_common(m)?;
    if !(inputs.theta_min > 0.0 && inputs.theta_min < 1.0) {
        return Err(NicoError::InvalidParameter("theta_min must lie in (0, 1)".into()));
    }
    if !(inputs.epsilon > 0.0) || !inputs.epsilon.is_finite() {
        return Err(NicoError::InvalidParameter("epsilon must be positive".into()));
    }
    let t = inputs.lengths.len() as f64;
    let n = inputs.lengths[m] as f64;
    let b = inputs.b[m];
    // 1 - (1-delta)^(1/T), computed without cancellation.
    let denom = -f64::exp_m1(f64::ln_1p(-inputs.delta) / t);
    let log_term = (2.0 * n * n / denom).ln();
    let raw = 2.0 * t * t * n.powi(4) * b * b * inputs.theta_min.ln().powi(2)
        / (inputs.epsilon * inputs.epsilon)
        * log_term;
    ceil_to_u64(raw)
}

/// Per-observation sample count guaranteeing a monotone update with
/// probability `1 - delta`:
/// `L_m = (27 b_m / lambda) * ((2 sum N + Delta*) / Delta*)^2
///        * log(4 sum N^2 / delta)`, rounded up.
pub fn monotone_sample_size(inputs: &BoundInputs, m: usize) -> Result<u64> {
    inputs.validate_common(m)?;
    if !(inputs.lambda > 0.0) || !inputs.lambda.is_finite() {
        return Err(NicoError::InvalidParameter("lambda must be positive".into()));
    }
    if !(inputs.delta_star > 0.0) {
        return Err(NicoError::BoundUndefined(
            "Delta(theta*) must be positive for the monotonicity bound".into(),
        ));
    }
    let sum_n: f64 = inputs.lengths.iter().map(|&n| n as f64).sum();
    let sum_n2: f64 = inputs.lengths.iter().map(|&n| (n as f64) * (n as f64)).sum();
    let b = inputs.b[m];
    let ratio = (2.0 * sum_n + inputs.delta_star) / inputs.delta_star;
    let raw = 27.0 * b / inputs.lambda * ratio * ratio * (4.0 * sum_n2 / inputs.delta).ln();
    ceil_to_u64(raw)
}

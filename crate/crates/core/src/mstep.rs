//! Closed-form M-step updates from sufficient statistics: maximum
//! likelihood, Dirichlet-prior MAP with the positive-part operator, the
//! fully observed estimates, and the known-endpoints initial distribution.

use ndarray::{Array1, Array2};

use crate::error::{NicoError, Result};
use crate::model::{safe_ln, EndpointMode, MarkovModel, Observation, SufficientStats, LOG_ZERO};

/// Dirichlet prior parameters for `pi` and each row of `A`. Entries may be
/// negative (improper priors pushing toward sparsity); zero everywhere
/// reproduces the maximum likelihood update.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPriors {
    pub u: Array1<f64>,
    pub v: Array2<f64>,
}

impl DirichletPriors {
    /// Constant priors `u = c`, `v = c` over `n` states.
    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            u: Array1::from_elem(n, c),
            v: Array2::from_elem((n, n), c),
        }
    }
}

/// Expected counts accumulated over observations: initial-state mass and
/// transition mass per ordered state pair.
fn accumulate(
    stats: &[SufficientStats],
    observations: &[Observation],
    num_states: usize,
) -> Result<(Array1<f64>, Array2<f64>)> {
    if stats.len() != observations.len() {
        return Err(NicoError::DimensionMismatch(format!(
            "{} statistics for {} observations",
            stats.len(),
            observations.len()
        )));
    }
    let mut pi_acc = Array1::zeros(num_states);
    let mut a_acc = Array2::zeros((num_states, num_states));
    for (st, obs) in stats.iter().zip(observations) {
        let n = obs.len();
        if st.len() != n {
            return Err(NicoError::DimensionMismatch(format!(
                "statistics of size {} for an observation of length {}",
                st.len(),
                n
            )));
        }
        let y = obs.states();
        for t in 0..n {
            pi_acc[y[t]] += st.r1[t];
        }
        for later in 0..n {
            for earlier in 0..n {
                let mass = st.alpha[[later, earlier]];
                if mass != 0.0 {
                    a_acc[[y[earlier], y[later]]] += mass;
                }
            }
        }
    }
    Ok((pi_acc, a_acc))
}

/// States co-occurring with each state in any observation.
fn cooccurring(observations: &[Observation], num_states: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![std::collections::BTreeSet::new(); num_states];
    for obs in observations {
        for &i in obs.states() {
            for &j in obs.states() {
                if i != j {
                    sets[i].insert(j);
                }
            }
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Normalizes accumulated masses into a model. Rows with no outgoing mass
/// get a uniform distribution over their co-occurring states (fully uniform
/// when the state co-occurs with nothing); such rows never multiply into
/// any observation's likelihood.
fn finalize(
    pi_acc: Array1<f64>,
    a_acc: Array2<f64>,
    observations: &[Observation],
    num_states: usize,
) -> Result<MarkovModel> {
    let pi_total: f64 = pi_acc.sum();
    if pi_total <= 0.0 {
        return Err(NicoError::InvalidParameter(
            "initial-state mass is zero across all observations".into(),
        ));
    }
    let pi = pi_acc.mapv(|v| v / pi_total);

    let mut a = a_acc;
    let co = cooccurring(observations, num_states);
    for i in 0..num_states {
        let row_sum: f64 = a.row(i).sum();
        if row_sum > 0.0 {
            a.row_mut(i).mapv_inplace(|v| v / row_sum);
        } else if co[i].is_empty() {
            a.row_mut(i).fill(1.0 / num_states as f64);
        } else {
            let w = 1.0 / co[i].len() as f64;
            for &j in &co[i] {
                a[[i, j]] = w;
            }
        }
    }
    MarkovModel::new(pi, a, 0.0)
}

/// Maximum likelihood update from per-observation expected statistics.
pub fn ml_update(
    stats: &[SufficientStats],
    observations: &[Observation],
    num_states: usize,
) -> Result<MarkovModel> {
    let (pi_acc, a_acc) = accumulate(stats, observations, num_states)?;
    finalize(pi_acc, a_acc, observations, num_states)
}

/// MAP update with Dirichlet priors: numerators `(u_i + mass)_+` and
/// `(v_ij + mass)_+`. Negative parameters prune entries via the positive
/// part; a transition row whose numerator clips entirely to zero is an
/// error naming the row.
pub fn map_update(
    stats: &[SufficientStats],
    observations: &[Observation],
    priors: &DirichletPriors,
    num_states: usize,
) -> Result<MarkovModel> {
    if priors.u.len() != num_states
        || priors.v.nrows() != num_states
        || priors.v.ncols() != num_states
    {
        return Err(NicoError::DimensionMismatch(format!(
            "priors sized {}/{}x{} for {} states",
            priors.u.len(),
            priors.v.nrows(),
            priors.v.ncols(),
            num_states
        )));
    }
    let (mut pi_acc, mut a_acc) = accumulate(stats, observations, num_states)?;

    for (i, v) in pi_acc.iter_mut().enumerate() {
        *v = (*v + priors.u[i]).max(0.0);
    }
    let had_outgoing: Vec<bool> = (0..num_states)
        .map(|i| a_acc.row(i).sum() > 0.0)
        .collect();
    for ((i, j), v) in a_acc.indexed_iter_mut() {
        *v = (*v + priors.v[[i, j]]).max(0.0);
    }
    // A row that had statistics mass but lost everything to the positive
    // part cannot be renormalized meaningfully.
    for i in 0..num_states {
        if had_outgoing[i] && a_acc.row(i).sum() <= 0.0 {
            return Err(NicoError::RowClippedToZero(i));
        }
    }
    finalize(pi_acc, a_acc, observations, num_states)
}

/// Counting estimates from fully observed (correctly ordered) paths.
pub fn ordered_ml_estimates(paths: &[Vec<usize>], num_states: usize) -> Result<MarkovModel> {
    if paths.is_empty() {
        return Err(NicoError::NoObservations);
    }
    let mut pi_acc = Array1::zeros(num_states);
    let mut a_acc = Array2::zeros((num_states, num_states));
    for path in paths {
        if path.is_empty() {
            return Err(NicoError::EmptyObservation);
        }
        pi_acc[path[0]] += 1.0;
        for w in path.windows(2) {
            a_acc[[w[0], w[1]]] += 1.0;
        }
    }
    let observations: Vec<Observation> = paths
        .iter()
        .map(|p| Observation::new(p.clone(), EndpointMode::Free))
        .collect::<Result<_>>()?;
    finalize(pi_acc, a_acc, &observations, num_states)
}

/// Empirical source frequencies: `pi_i = (1/T) sum_m [y_1 = i]`.
pub fn known_endpoint_pi(observations: &[Observation], num_states: usize) -> Result<Array1<f64>> {
    if observations.is_empty() {
        return Err(NicoError::NoObservations);
    }
    if observations
        .iter()
        .any(|o| o.mode() != EndpointMode::KnownEndpoints)
    {
        return Err(NicoError::MixedEndpointModes);
    }
    let mut pi = Array1::zeros(num_states);
    for obs in observations {
        pi[obs.source()] += 1.0;
    }
    let t = observations.len() as f64;
    pi.mapv_inplace(|v| v / t);
    Ok(pi)
}

/// Expected complete-data log-likelihood `Q(model; stats)`, assembled by
/// plugging the expected statistics into the complete log-likelihood.
/// Uses the `0 * log 0 = 0` convention.
pub fn q_value(
    stats: &[SufficientStats],
    observations: &[Observation],
    model: &MarkovModel,
) -> f64 {
    let mut q = 0.0;
    for (st, obs) in stats.iter().zip(observations) {
        let y = obs.states();
        let n = obs.len();
        for t in 0..n {
            let r = st.r1[t];
            if r > 0.0 {
                q += r * safe_ln(model.pi[y[t]]);
            }
        }
        for later in 0..n {
            for earlier in 0..n {
                let mass = st.alpha[[later, earlier]];
                if mass > 0.0 {
                    q += mass * safe_ln(model.a[[y[earlier], y[later]]]);
                }
            }
        }
    }
    q.max(LOG_ZERO)
}

/// Blends a distribution toward uniform so every entry is at least
/// `theta`: `p' = (1 - K theta) p + theta`. Keeps the sum at one exactly
/// and leaves zero entries at the floor value.
pub fn floor_distribution(dist: &mut Array1<f64>, theta: f64) {
    if theta <= 0.0 {
        return;
    }
    let k = dist.len() as f64;
    let scale = 1.0 - k * theta;
    dist.mapv_inplace(|p| scale * p + theta);
}

/// Applies [`floor_distribution`] to `pi` and every row of `A`, recording
/// the floor on the model.
pub fn floor_model(model: &mut MarkovModel, theta: f64) {
    if theta <= 0.0 {
        return;
    }
    let k = model.num_states() as f64;
    let scale = 1.0 - k * theta;
    model.pi.mapv_inplace(|p| scale * p + theta);
    model.a.mapv_inplace(|p| scale * p + theta);
    model.theta_min = theta;
}

//! Monte Carlo verification of the least-squares utility estimator.
//!
//! Each trial draws pairwise observations `rho(i, j) = u_i - u_j + eps_ij`
//! where the noise has a one-factor structure: a component shared by every
//! pair plus an idiosyncratic remainder. The trial is pushed through the
//! production estimator and running moments of the recovered utilities (and
//! of the implied consistent pairwise values) are accumulated.
//!
//! Trials are processed in fixed 256-trial chunks whose partial moments are
//! merged in chunk order, and every trial seeds its own generator stream, so
//! results are bit-identical no matter how many threads run the study.

use crate::potential::solve_utilities;
use crate::signal::PreferenceMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid noise model: {0}")]
    InvalidModel(String),
    #[error("need at least 2 trials to estimate variances, got {0}")]
    TooFewTrials(usize),
}

/// One-factor noise on the pairwise observations: every pair's disturbance
/// has variance `sigma^2` and shares covariance `cov` with every other pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub n_securities: usize,
    /// Standard deviation of each pairwise disturbance.
    pub sigma: f64,
    /// Covariance between distinct pairs' disturbances; `0 <= cov <= sigma^2`.
    pub cov: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let fail = |msg: String| Err(EstimatorError::InvalidModel(msg));
        if self.n_securities < 2 {
            return fail(format!(
                "need at least 2 securities, got {}",
                self.n_securities
            ));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return fail(format!("sigma must be finite and positive, got {}", self.sigma));
        }
        if !self.cov.is_finite() || self.cov < 0.0 || self.cov > self.sigma * self.sigma {
            return fail(format!(
                "cov must lie in [0, sigma^2] = [0, {}], got {}",
                self.sigma * self.sigma,
                self.cov
            ));
        }
        Ok(())
    }

    /// Variance of the estimated utility of security `i` under this noise.
    ///
    /// The shared factor enters security `i`'s row sum with coefficient
    /// `(n - 1 - 2i) / n` (its sign flips across the antisymmetric matrix),
    /// and the idiosyncratic parts add `(n - 1) (sigma^2 - cov) / n^2`.
    pub fn utility_variance(&self, i: usize) -> f64 {
        let n = self.n_securities as f64;
        let c = n - 1.0 - 2.0 * i as f64;
        (c * c * self.cov + (n - 1.0) * (self.sigma * self.sigma - self.cov)) / (n * n)
    }

    /// [`Self::utility_variance`] averaged over all securities; approaches
    /// `cov / 3` as the universe grows, so shared noise puts a floor under
    /// the estimator's variance that more securities cannot wash out.
    pub fn mean_utility_variance(&self) -> f64 {
        let n = self.n_securities as f64;
        (self.cov * (n * n - 1.0) / 3.0 + (n - 1.0) * (self.sigma * self.sigma - self.cov))
            / (n * n)
    }

    /// Variance of the consistent pairwise value `u_i - u_j` averaged over
    /// all pairs.
    pub fn mean_preference_variance(&self) -> f64 {
        let n = self.n_securities as f64;
        2.0 * (self.sigma * self.sigma - self.cov) / n + 2.0 * self.cov * (n + 1.0) / (3.0 * n)
    }
}

/// Running mean/variance accumulator over fixed-dimension vectors,
/// mergeable across chunks without order sensitivity beyond merge order.
#[derive(Debug, Clone)]
struct Moments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for (d, &v) in x.iter().enumerate() {
            let delta = v - self.mean[d];
            self.mean[d] += delta / k;
            self.m2[d] += delta * (v - self.mean[d]);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.count = other.count;
            self.mean.copy_from_slice(&other.mean);
            self.m2.copy_from_slice(&other.m2);
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for d in 0..self.mean.len() {
            let delta = other.mean[d] - self.mean[d];
            self.mean[d] += delta * nb / n;
            self.m2[d] += other.m2[d] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    fn variance(&self, d: usize) -> f64 {
        self.m2[d] / (self.count - 1) as f64
    }
}

/// Outcome of a Monte Carlo estimator study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRun {
    pub n_securities: usize,
    pub sigma: f64,
    pub cov: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub true_utilities: Vec<f64>,
    pub mean_utilities: Vec<f64>,
    /// Empirical variance of the estimated utility, per security.
    pub var_utilities: Vec<f64>,
    /// Closed-form variance under the noise model, per security.
    pub theoretical_var_utilities: Vec<f64>,
    /// Mean of `var_utilities`.
    pub mean_utility_variance: f64,
    /// Mean of `theoretical_var_utilities`.
    pub theoretical_utility_variance: f64,
    /// Empirical variance of `u_i - u_j`, averaged over pairs.
    pub mean_preference_variance: f64,
    pub theoretical_preference_variance: f64,
    /// Largest `|empirical mean - truth| / (std / sqrt(trials))` over
    /// securities; a large value flags estimator bias.
    pub max_abs_standardized_bias: f64,
}

/// Verdict of [`bias_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasTest {
    pub max_abs_standardized_bias: f64,
    pub threshold: f64,
    pub unbiased: bool,
}

/// Standardized-bias threshold: the maximum of hundreds of approximately
/// standard-normal statistics stays below this except with negligible
/// probability.
pub const BIAS_Z_THRESHOLD: f64 = 5.0;

pub fn bias_test(run: &EstimatorRun) -> BiasTest {
    BiasTest {
        max_abs_standardized_bias: run.max_abs_standardized_bias,
        threshold: BIAS_Z_THRESHOLD,
        unbiased: run.max_abs_standardized_bias < BIAS_Z_THRESHOLD,
    }
}

/// Trials per deterministic work unit.
const CHUNK: usize = 256;

/// Zero-sum utility ramp the trials try to recover.
fn ramp_utilities(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) / n as f64)
        .collect()
}

/// Runs `n_trials` noisy recoveries of a fixed utility ramp through the
/// production estimator and reports moment statistics against the noise
/// model's closed forms.
pub fn simulate_estimator(
    model: &NoiseModel,
    n_trials: usize,
    seed: u64,
) -> Result<EstimatorRun, EstimatorError> {
    model.validate()?;
    if n_trials < 2 {
        return Err(EstimatorError::TooFewTrials(n_trials));
    }
    let n = model.n_securities;
    let n_pairs = n * (n - 1) / 2;
    let truth = ramp_utilities(n);
    let sq_shared = model.cov.sqrt();
    let sq_idio = (model.sigma * model.sigma - model.cov).sqrt();

    let n_chunks = n_trials.div_ceil(CHUNK);
    let partials: Vec<(Moments, Moments)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_trials);
            let mut mom_u = Moments::new(n);
            let mut mom_p = Moments::new(n_pairs);
            let mut rho_star = vec![0.0f64; n_pairs];
            for trial in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial as u64);
                let z0: f64 = rng.sample(StandardNormal);
                let mut values = Vec::with_capacity(n_pairs);
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let z: f64 = rng.sample(StandardNormal);
                        values.push(truth[i] - truth[j] + sq_shared * z0 + sq_idio * z);
                        k += 1;
                    }
                }
                debug_assert_eq!(k, n_pairs);
                let prefs =
                    PreferenceMatrix::from_dense(n, values).expect("pair count is consistent");
                let estimate = solve_utilities(&prefs);
                let u = estimate.as_slice();
                mom_u.update(u);
                let mut k = 0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        rho_star[k] = u[i] - u[j];
                        k += 1;
                    }
                }
                mom_p.update(&rho_star);
            }
            (mom_u, mom_p)
        })
        .collect();

    let mut mom_u = Moments::new(n);
    let mut mom_p = Moments::new(n_pairs);
    for (u, p) in &partials {
        mom_u.merge(u);
        mom_p.merge(p);
    }

    let var_utilities: Vec<f64> = (0..n).map(|i| mom_u.variance(i)).collect();
    let theoretical_var_utilities: Vec<f64> = (0..n).map(|i| model.utility_variance(i)).collect();
    let max_abs_standardized_bias = (0..n)
        .map(|i| {
            let se = (var_utilities[i] / n_trials as f64).sqrt();
            ((mom_u.mean[i] - truth[i]) / se).abs()
        })
        .fold(0.0f64, f64::max);
    let mean_preference_variance =
        (0..n_pairs).map(|k| mom_p.variance(k)).sum::<f64>() / n_pairs as f64;

    Ok(EstimatorRun {
        n_securities: n,
        sigma: model.sigma,
        cov: model.cov,
        n_trials,
        seed,
        true_utilities: truth,
        mean_utilities: mom_u.mean.clone(),
        mean_utility_variance: var_utilities.iter().sum::<f64>() / n as f64,
        var_utilities,
        theoretical_utility_variance: model.mean_utility_variance(),
        theoretical_var_utilities,
        mean_preference_variance,
        theoretical_preference_variance: model.mean_preference_variance(),
        max_abs_standardized_bias,
    })
}

//! Least-squares projection of pairwise preferences onto a consistent
//! utility scale.
//!
//! A pairwise preference vector is *consistent* when it is the difference of
//! a per-security utility: `value(i, j) = u[i] - u[j]`. Arbitrary signals
//! rarely are (cycles appear), so we take the utilities minimizing the
//! squared distance between the observed values and the consistent ones,
//! with the normalization `sum(u) = 0` pinning the free additive constant.
//!
//! Over the *complete* comparison graph the normal equations collapse to a
//! closed form: `u[i]` is simply `(1/n) * sum over j of value(i, j)` (the
//! diagonal contributes zero). That is what [`solve_utilities`] computes,
//! matrix-free; the integration tests check it against an explicit dense
//! solve of the normal equations.

use crate::signal::PreferenceMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the zero-sum invariant, per security.
pub const ZERO_SUM_EPS: f64 = 1e-9;

#[derive(Error, Debug)]
pub enum PotentialError {
    #[error("utilities must sum to zero, got sum {sum} for n={n}")]
    NotZeroSum { sum: f64, n: usize },
}

/// Per-security utilities normalized to sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UtilityVector(Vec<f64>);

impl UtilityVector {
    /// Wraps a vector, enforcing the zero-sum normalization.
    pub fn new(values: Vec<f64>) -> Result<Self, PotentialError> {
        let sum: f64 = values.iter().sum();
        if sum.abs() > ZERO_SUM_EPS * values.len().max(1) as f64 {
            return Err(PotentialError::NotZeroSum {
                sum,
                n: values.len(),
            });
        }
        Ok(Self(values))
    }

    /// Centers an arbitrary vector to zero sum.
    pub fn centered(mut values: Vec<f64>) -> Self {
        if !values.is_empty() {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            for v in &mut values {
                *v -= mean;
            }
        }
        Self(values)
    }

    pub(crate) fn from_solver(values: Vec<f64>) -> Self {
        debug_assert!(
            values.iter().sum::<f64>().abs() <= ZERO_SUM_EPS * values.len().max(1) as f64
        );
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for UtilityVector {
    type Error = PotentialError;
    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<UtilityVector> for Vec<f64> {
    fn from(u: UtilityVector) -> Self {
        u.0
    }
}

/// Pairwise preferences that are exact utility differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistentPreferences(PreferenceMatrix);

impl ConsistentPreferences {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.0.value(i, j)
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn as_matrix(&self) -> &PreferenceMatrix {
        &self.0
    }
}

/// Least-squares utilities for a pairwise preference matrix.
///
/// Non-scoreable pairs carry value zero by construction, so they simply do
/// not pull on either security; the divisor stays `n` regardless of how many
/// pairs were scoreable.
pub fn solve_utilities(prefs: &PreferenceMatrix) -> UtilityVector {
    let n = prefs.n();
    let mut acc = vec![0.0f64; n];
    for (i, j, v, _) in prefs.iter_pairs() {
        acc[i] += v;
        acc[j] -= v;
    }
    if n > 0 {
        let scale = 1.0 / n as f64;
        for a in &mut acc {
            *a *= scale;
        }
    }
    UtilityVector::from_solver(acc)
}

/// The consistent preference vector implied by a utility vector:
/// `value(i, j) = u[i] - u[j]` for every pair.
pub fn consistent_preferences(utilities: &UtilityVector) -> ConsistentPreferences {
    let n = utilities.len();
    let u = utilities.as_slice();
    let mut values = Vec::with_capacity(crate::signal::pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            values.push(u[i] - u[j]);
        }
    }
    let matrix = PreferenceMatrix::from_dense(n, values)
        .expect("pair count matches n by construction");
    ConsistentPreferences(matrix)
}

/// Convenience: matrix -> utilities -> consistent matrix in one step.
pub fn project_consistent(prefs: &PreferenceMatrix) -> (UtilityVector, ConsistentPreferences) {
    let u = solve_utilities(prefs);
    let rho = consistent_preferences(&u);
    (u, rho)
}

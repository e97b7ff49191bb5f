//! Standardized pairwise preference signals from log price spreads.
//!
//! For securities `i < j` the raw signal is the log spread
//! `c = ln(p_i / p_j)`. The preference value of the pair on date `t` is the
//! current spread standardized against a trailing window of `lookback`
//! spreads ending the day before: `(c_t - mu) / sigma`. Pairs whose window
//! is incomplete or whose spread never moves are *non-scoreable* and carry
//! value zero so they drop out of every downstream sum.

use crate::market::PricePanel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this window standard deviation a pair is treated as degenerate
/// (non-scoreable) rather than divided by noise.
pub const SIGMA_EPS: f64 = 1e-10;

#[derive(Error, Debug)]
pub enum SignalError {
    #[error("pair indices must satisfy i < j < n, got i={i}, j={j}, n={n}")]
    IndexOrder { i: usize, j: usize, n: usize },
    #[error("prices must be positive, got p_i={pi}, p_j={pj}")]
    NonPositivePrice { pi: f64, pj: f64 },
    #[error("window needs at least {needed} observations, got {got}")]
    WindowTooShort { needed: usize, got: usize },
    #[error("date index {t} outside usable range [{lookback}, {n_days}) for lookback {lookback}")]
    DateOutOfRange {
        t: usize,
        lookback: usize,
        n_days: usize,
    },
    #[error("preference matrix for n={n} needs {expected} pair values, got {got}")]
    PairCount { n: usize, expected: usize, got: usize },
    #[error("non-scoreable pair ({i}, {j}) must carry value 0, got {value}")]
    NonScoreableValue { i: usize, j: usize, value: f64 },
}

/// Divisor convention for the trailing window moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorConvention {
    /// Ordinary sample moments: mean over T, variance over T - 1.
    #[default]
    Standard,
    /// Recursive running-mean convention: the T-term spread sum is divided
    /// by T - 1, and the squared deviations from the *running* mean (the
    /// mean of the spreads seen so far, with the first term dropping out)
    /// are divided by T - 2.
    Recursive,
}

/// How the standardized spread is oriented before it is read as a
/// preference.
///
/// `Contrarian` prefers the security that has *fallen* relative to the pair
/// (a spread above its trailing mean is read as "the denominator security is
/// cheap"), which is the mean-reversion trade. `Continuation` keeps the raw
/// standardized-spread direction, preferring the security that has risen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Contrarian,
    Continuation,
}

/// Number of unordered pairs among `n` securities.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

#[inline]
pub(crate) fn pair_index_unchecked(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Position of pair `(i, j)` in the lexicographic enumeration of all
/// unordered pairs: `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
pub fn pair_index(i: usize, j: usize, n: usize) -> Result<usize, SignalError> {
    if i >= j || j >= n {
        return Err(SignalError::IndexOrder { i, j, n });
    }
    Ok(pair_index_unchecked(i, j, n))
}

/// Inverse of [`pair_index`]: recovers `(i, j)` from a flat pair position.
pub fn pair_from_index(k: usize, n: usize) -> Result<(usize, usize), SignalError> {
    let total = pair_count(n);
    if k >= total {
        return Err(SignalError::IndexOrder { i: k, j: k, n });
    }
    let mut rem = k;
    for i in 0..n {
        let row = n - i - 1;
        if rem < row {
            return Ok((i, i + 1 + rem));
        }
        rem -= row;
    }
    unreachable!("k < pair_count(n) always resolves to a row")
}

/// Log price spread `ln(p_i / p_j)`.
pub fn log_spread(p_i: f64, p_j: f64) -> Result<f64, SignalError> {
    if !(p_i > 0.0 && p_j > 0.0) {
        return Err(SignalError::NonPositivePrice { pi: p_i, pj: p_j });
    }
    Ok((p_i / p_j).ln())
}

/// Trailing-window location and scale of a spread series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadWindowStats {
    pub mu: f64,
    pub sigma: f64,
    pub window_len: usize,
}

impl SpreadWindowStats {
    /// True when the window scale is too small to standardize against
    /// (a non-finite scale counts as degenerate).
    pub fn is_degenerate(&self) -> bool {
        self.sigma.is_nan() || self.sigma < SIGMA_EPS
    }
}

/// Computes window moments of a spread sequence under the given convention.
pub fn window_stats(
    spreads: &[f64],
    convention: EstimatorConvention,
) -> Result<SpreadWindowStats, SignalError> {
    let t = spreads.len();
    if t < 3 {
        return Err(SignalError::WindowTooShort { needed: 3, got: t });
    }
    let sum: f64 = spreads.iter().sum();
    let (mu, var) = match convention {
        EstimatorConvention::Standard => {
            let mu = sum / t as f64;
            let m2: f64 = spreads.iter().map(|c| (c - mu) * (c - mu)).sum();
            (mu, m2 / (t - 1) as f64)
        }
        EstimatorConvention::Recursive => {
            let mu = sum / (t - 1) as f64;
            // Deviations are taken against the running mean of the spreads
            // seen so far; the first observation has no history and drops
            // out of the sum.
            let mut prefix = 0.0;
            let mut m2 = 0.0;
            for (r, &c) in spreads.iter().enumerate() {
                if r > 0 {
                    let d = c - prefix / r as f64;
                    m2 += d * d;
                }
                prefix += c;
            }
            (mu, m2 / (t - 2) as f64)
        }
    };
    Ok(SpreadWindowStats {
        mu,
        sigma: var.max(0.0).sqrt(),
        window_len: t,
    })
}

/// Dense upper-triangular pairwise preference values.
///
/// Only pairs `i < j` are stored; reading `(j, i)` returns the negated
/// stored value (antisymmetry is implicit, never materialized). Each pair
/// also carries a scoreable flag; non-scoreable pairs hold value zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    n: usize,
    values: Vec<f64>,
    scoreable: Vec<bool>,
}

impl PreferenceMatrix {
    /// An all-non-scoreable matrix of zeros.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; pair_count(n)],
            scoreable: vec![false; pair_count(n)],
        }
    }

    /// Builds a matrix from dense upper-triangular storage.
    pub fn from_values(
        n: usize,
        values: Vec<f64>,
        scoreable: Vec<bool>,
    ) -> Result<Self, SignalError> {
        let expected = pair_count(n);
        if values.len() != expected || scoreable.len() != expected {
            return Err(SignalError::PairCount {
                n,
                expected,
                got: values.len(),
            });
        }
        for k in 0..expected {
            if !scoreable[k] && values[k] != 0.0 {
                let (i, j) = pair_from_index(k, n)?;
                return Err(SignalError::NonScoreableValue {
                    i,
                    j,
                    value: values[k],
                });
            }
        }
        Ok(Self {
            n,
            values,
            scoreable,
        })
    }

    /// A fully scoreable matrix from raw pair values (test/lab convenience).
    pub fn from_dense(n: usize, values: Vec<f64>) -> Result<Self, SignalError> {
        let scoreable = vec![true; values.len()];
        Self::from_values(n, values, scoreable)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_pairs(&self) -> usize {
        self.values.len()
    }

    /// Signed read: `value(i, j) = -value(j, i)`, diagonal is zero.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "pair out of range");
        if i == j {
            0.0
        } else if i < j {
            self.values[pair_index_unchecked(i, j, self.n)]
        } else {
            -self.values[pair_index_unchecked(j, i, self.n)]
        }
    }

    pub fn is_scoreable(&self, i: usize, j: usize) -> bool {
        assert!(i < self.n && j < self.n, "pair out of range");
        if i == j {
            return false;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.scoreable[pair_index_unchecked(a, b, self.n)]
    }

    /// Sets the stored (upper-triangular) value of a scoreable pair.
    pub fn set_pair(&mut self, i: usize, j: usize, value: f64) -> Result<(), SignalError> {
        let k = pair_index(i, j, self.n)?;
        self.values[k] = value;
        self.scoreable[k] = true;
        Ok(())
    }

    /// Iterates `(i, j, value, scoreable)` over the stored upper triangle.
    pub fn iter_pairs(&self) -> impl Iterator<Item = (usize, usize, f64, bool)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.values.iter().zip(self.scoreable.iter()))
            .map(|((i, j), (&v, &s))| (i, j, v, s))
    }

    /// Flips the sign of every stored value (scoreability is unchanged).
    pub fn negate(&mut self) {
        for v in &mut self.values {
            // Avoid manufacturing -0.0 on non-scoreable zeros.
            if *v != 0.0 {
                *v = -*v;
            }
        }
    }

    /// Applies the configured orientation to the standardized spreads.
    pub fn orient(&mut self, orientation: Orientation) {
        if orientation == Orientation::Contrarian {
            self.negate();
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Standardized pairwise preferences for date index `t` of a panel.
///
/// The window covers the `lookback` dates before `t`; the standardized value
/// is the date-`t` spread's z-score against that window. A pair is scoreable
/// only when both securities are valid on every window date *and* on `t`
/// itself, and the window scale is non-degenerate.
pub fn preference_matrix(
    panel: &PricePanel,
    t: usize,
    lookback: usize,
    convention: EstimatorConvention,
) -> Result<PreferenceMatrix, SignalError> {
    let logs = panel.log_closes();
    preference_matrix_from_logs(&logs, panel, t, lookback, convention)
}

/// Core of [`preference_matrix`] with the log-close matrix precomputed by
/// the caller, so a backtest loop pays for the logs once.
pub(crate) fn preference_matrix_from_logs(
    logs: &[f64],
    panel: &PricePanel,
    t: usize,
    lookback: usize,
    convention: EstimatorConvention,
) -> Result<PreferenceMatrix, SignalError> {
    let n = panel.n_securities();
    let n_days = panel.n_days();
    debug_assert_eq!(logs.len(), n * n_days);
    if lookback < 3 {
        return Err(SignalError::WindowTooShort {
            needed: 3,
            got: lookback,
        });
    }
    if t < lookback || t >= n_days {
        return Err(SignalError::DateOutOfRange {
            t,
            lookback,
            n_days,
        });
    }

    let rows = lookback + 1; // window dates plus the current date
    let start = t - lookback;
    // Transpose the window block to one contiguous strip per security.
    let mut cols = vec![f64::NAN; n * rows];
    let mut usable = vec![false; n];
    for i in 0..n {
        let ok = (start..=t).all(|row| panel.is_valid(row, i));
        usable[i] = ok;
        if ok {
            for (r, row) in (start..=t).enumerate() {
                cols[i * rows + r] = logs[row * n + i];
            }
        }
    }

    let l = lookback;
    let lf = l as f64;
    let mut values = vec![0.0f64; pair_count(n)];
    let mut scoreable = vec![false; pair_count(n)];
    let mut buf = vec![0.0f64; l];
    let mut k = 0usize;
    for i in 0..n {
        let a = &cols[i * rows..(i + 1) * rows];
        for j in i + 1..n {
            if usable[i] && usable[j] {
                let b = &cols[j * rows..(j + 1) * rows];
                let mut sum = 0.0;
                for r in 0..l {
                    let c = a[r] - b[r];
                    buf[r] = c;
                    sum += c;
                }
                let current = a[l] - b[l];
                let (mu, var) = match convention {
                    EstimatorConvention::Standard => {
                        let mu = sum / lf;
                        let mut m2 = 0.0;
                        for &c in &buf[..l] {
                            let d = c - mu;
                            m2 += d * d;
                        }
                        (mu, m2 / (lf - 1.0))
                    }
                    EstimatorConvention::Recursive => {
                        let mu = sum / (lf - 1.0);
                        let mut prefix = 0.0;
                        let mut m2 = 0.0;
                        for (r, &c) in buf[..l].iter().enumerate() {
                            if r > 0 {
                                let d = c - prefix / r as f64;
                                m2 += d * d;
                            }
                            prefix += c;
                        }
                        (mu, m2 / (lf - 2.0))
                    }
                };
                let sigma = var.max(0.0).sqrt();
                if sigma >= SIGMA_EPS {
                    values[k] = (current - mu) / sigma;
                    scoreable[k] = true;
                }
            }
            k += 1;
        }
    }
    Ok(PreferenceMatrix {
        n,
        values,
        scoreable,
    })
}

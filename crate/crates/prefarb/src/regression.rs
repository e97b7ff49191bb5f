//! OLS factor regression for daily return series.
//!
//! Returns and factor rows are aligned on their date intersection, an
//! intercept column is always included, and the normal equations are solved
//! by Cholesky factorization (which doubles as the collinearity check).

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("factor file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate factor date {0}")]
    DuplicateDate(NaiveDate),
    #[error("no overlapping dates between returns and factors")]
    NoOverlap,
    #[error("{n} aligned observations are too few for {k} factors plus intercept")]
    TooFewObservations { n: usize, k: usize },
    #[error("factor matrix is collinear; normal equations are singular")]
    Collinear,
}

/// Dated factor observations, one column per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: Vec<f64>,
}

impl FactorPanel {
    /// `values` is row-major `dates.len() * names.len()`; rows may be given
    /// in any order and are sorted by date.
    pub fn new(
        dates: Vec<NaiveDate>,
        names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, RegressionError> {
        let k = names.len();
        if dates.is_empty() || k == 0 {
            return Err(RegressionError::Parse {
                line: 0,
                msg: "factor panel needs at least one date and one factor".to_string(),
            });
        }
        if values.len() != dates.len() * k {
            return Err(RegressionError::Parse {
                line: 0,
                msg: format!(
                    "expected {} values ({} dates x {} factors), got {}",
                    dates.len() * k,
                    dates.len(),
                    k,
                    values.len()
                ),
            });
        }
        let mut order: Vec<usize> = (0..dates.len()).collect();
        order.sort_by_key(|&r| dates[r]);
        for w in order.windows(2) {
            if dates[w[0]] == dates[w[1]] {
                return Err(RegressionError::DuplicateDate(dates[w[0]]));
            }
        }
        let sorted_dates: Vec<NaiveDate> = order.iter().map(|&r| dates[r]).collect();
        let mut sorted_values = Vec::with_capacity(values.len());
        for &r in &order {
            sorted_values.extend_from_slice(&values[r * k..(r + 1) * k]);
        }
        Ok(Self {
            dates: sorted_dates,
            names,
            values: sorted_values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let k = self.names.len();
        &self.values[t * k..(t + 1) * k]
    }
}

/// Loads a factor CSV whose header is `date` followed by one column per
/// factor; every cell must be a finite number.
pub fn load_factors<P: AsRef<Path>>(path: P) -> Result<FactorPanel, RegressionError> {
    read_factors(std::fs::File::open(path)?)
}

pub fn read_factors<R: Read>(reader: R) -> Result<FactorPanel, RegressionError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || headers.get(0) != Some("date") {
        return Err(RegressionError::Parse {
            line: 1,
            msg: format!(
                "header must be `date` followed by factor names, got {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        if record.len() != headers.len() {
            return Err(RegressionError::Parse {
                line,
                msg: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let date: NaiveDate = record[0].parse().map_err(|e| RegressionError::Parse {
            line,
            msg: format!("bad date {:?}: {e}", &record[0]),
        })?;
        dates.push(date);
        for (name, field) in names.iter().zip(record.iter().skip(1)) {
            let v: f64 = field.trim().parse().map_err(|_| RegressionError::Parse {
                line,
                msg: format!("factor {name} has non-numeric value {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(RegressionError::Parse {
                    line,
                    msg: format!("factor {name} has non-finite value {field:?}"),
                });
            }
            values.push(v);
        }
    }
    FactorPanel::new(dates, names, values)
}

/// One estimated coefficient with its inference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorBeta {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// `p_value < 0.05`.
    pub significant: bool,
}

/// OLS fit of a return series on a factor panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRegressionResult {
    pub n_obs: usize,
    pub intercept: FactorBeta,
    pub betas: Vec<FactorBeta>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Residual standard deviation `sqrt(SSR / (n - k - 1))`.
    pub residual_std: f64,
}

/// When the residual variance collapses to zero (an exact fit), standard
/// errors below this are treated as degenerate rather than divided by.
const SE_EPS: f64 = 1e-300;

fn beta_stats(name: &str, coefficient: f64, std_error: f64, dof: f64) -> FactorBeta {
    let (t_stat, p_value) = if std_error <= SE_EPS {
        // Exact fit: a nonzero coefficient is unambiguously there, a zero
        // one unambiguously absent; keep the JSON finite either way.
        (0.0, if coefficient.abs() > 1e-12 { 0.0 } else { 1.0 })
    } else {
        let t = coefficient / std_error;
        let dist = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1");
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    FactorBeta {
        name: name.to_string(),
        coefficient,
        std_error,
        t_stat,
        p_value,
        significant: p_value < 0.05,
    }
}

/// Regresses `returns` (dated by `dates`, sorted ascending) on the factor
/// panel with an intercept, using only dates present in both series.
pub fn factor_regression(
    dates: &[NaiveDate],
    returns: &[f64],
    factors: &FactorPanel,
) -> Result<FactorRegressionResult, RegressionError> {
    assert_eq!(dates.len(), returns.len(), "one return per date");
    let k = factors.names.len();

    // Two-pointer intersection; both date vectors are ascending.
    let mut y = Vec::new();
    let mut rows: Vec<&[f64]> = Vec::new();
    let (mut a, mut b) = (0, 0);
    while a < dates.len() && b < factors.dates.len() {
        match dates[a].cmp(&factors.dates[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                y.push(returns[a]);
                rows.push(factors.row(b));
                a += 1;
                b += 1;
            }
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(RegressionError::NoOverlap);
    }
    if n < k + 2 {
        return Err(RegressionError::TooFewObservations { n, k });
    }

    let x = DMatrix::from_fn(n, k + 1, |r, c| if c == 0 { 1.0 } else { rows[r][c - 1] });
    let yv = DVector::from_vec(y);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let chol = xtx.cholesky().ok_or(RegressionError::Collinear)?;
    let beta = chol.solve(&xty);
    let cov_unscaled = chol.inverse();

    let residuals = &yv - &x * &beta;
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean = yv.iter().sum::<f64>() / n as f64;
    let sst: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let dof = (n - k - 1) as f64;
    let s2 = ssr / dof;
    let r_squared = if sst <= SE_EPS { 0.0 } else { 1.0 - ssr / sst };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof;

    let se = |i: usize| (s2 * cov_unscaled[(i, i)]).max(0.0).sqrt();
    let intercept = beta_stats("intercept", beta[0], se(0), dof);
    let betas = factors
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| beta_stats(name, beta[j + 1], se(j + 1), dof))
        .collect();

    Ok(FactorRegressionResult {
        n_obs: n,
        intercept,
        betas,
        r_squared,
        adj_r_squared,
        residual_std: s2.sqrt(),
    })
}

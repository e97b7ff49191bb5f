//! Daily backtest loop, summary statistics, and bootstrap resampling over
//! security subsets.
//!
//! Timing convention: a signal computed from closes through day `t` is
//! executed at the open of day `t + 1` and marked out at the open of day
//! `t + 2`, so the panel must extend two days past the last signal day. The
//! same pipeline ([`rank_date`]) drives both the loop and one-off ranking.

use crate::graph::{
    build_graph, prune_intermediate, select_vertices, threshold_edges, GraphError,
    PreferenceGraph, TradeSignalSet,
};
use crate::market::{PanelError, PricePanel};
use crate::portfolio::{allocate, momentum_update, PositionRegistry, Side, WeightScheme};
use crate::potential::{consistent_preferences, solve_utilities, PotentialError, UtilityVector};
use crate::signal::{
    preference_matrix_from_logs, EstimatorConvention, Orientation, SignalError,
};
use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Trading days per year used to annualize daily statistics.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("panel has {got} days but the loop needs at least {needed} (lookback + 3)")]
    TooFewDays { needed: usize, got: usize },
}

/// Everything the daily loop needs to run; all fields have defaults so a
/// JSON config may specify only what it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Window length `T` for spread standardization (days before the signal
    /// day).
    pub lookback: usize,
    /// Edge threshold: pairwise values below this are dropped from the graph.
    pub kappa: f64,
    /// Maximum number of longs picked from the top of the ranking.
    pub n_top: usize,
    /// Maximum number of shorts picked from the bottom of the ranking.
    pub m_bottom: usize,
    /// Proportional transaction cost per unit of turnover.
    pub tc_rate: f64,
    /// Leg-internal weighting rule.
    pub scheme: WeightScheme,
    /// Hold positions until their utility flips sign instead of rebuilding
    /// the book from scratch every day.
    pub momentum: bool,
    /// Window mean/deviation convention for spread standardization.
    pub estimator_convention: EstimatorConvention,
    /// Whether large positive spreads are shorted (contrarian) or bought
    /// (continuation).
    pub orientation: Orientation,
    /// Master seed for randomized studies (bootstrap sampling).
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            lookback: 60,
            kappa: 3.0,
            n_top: 20,
            m_bottom: 20,
            tc_rate: 0.001,
            scheme: WeightScheme::UtilityProportional,
            momentum: true,
            estimator_convention: EstimatorConvention::Standard,
            orientation: Orientation::Contrarian,
            seed: 42,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        let fail = |msg: String| Err(BacktestError::Config(msg));
        if self.lookback < 3 {
            return fail(format!("lookback must be at least 3, got {}", self.lookback));
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return fail(format!("kappa must be finite and non-negative, got {}", self.kappa));
        }
        if self.n_top == 0 && self.m_bottom == 0 {
            return fail("n_top and m_bottom must not both be zero".to_string());
        }
        if !self.tc_rate.is_finite() || self.tc_rate < 0.0 {
            return fail(format!(
                "tc_rate must be finite and non-negative, got {}",
                self.tc_rate
            ));
        }
        Ok(())
    }
}

/// Runs the full ranking pipeline for one signal day: preference matrix,
/// utility solve, thresholded and pruned graph, long/short candidates.
pub fn rank_date(
    panel: &PricePanel,
    t: usize,
    config: &BacktestConfig,
) -> Result<(UtilityVector, PreferenceGraph, TradeSignalSet), BacktestError> {
    config.validate()?;
    let logs = panel.log_closes();
    rank_from_logs(&logs, panel, t, config)
}

fn rank_from_logs(
    logs: &[f64],
    panel: &PricePanel,
    t: usize,
    config: &BacktestConfig,
) -> Result<(UtilityVector, PreferenceGraph, TradeSignalSet), BacktestError> {
    let mut prefs =
        preference_matrix_from_logs(logs, panel, t, config.lookback, config.estimator_convention)?;
    prefs.orient(config.orientation);
    let utilities = solve_utilities(&prefs);
    let consistent = consistent_preferences(&utilities);
    let graph = build_graph(&consistent, &utilities)?;
    let graph = threshold_edges(&graph, config.kappa);
    let graph = prune_intermediate(&graph);
    let signals = select_vertices(&graph, config.n_top, config.m_bottom);
    Ok((utilities, graph, signals))
}

/// One row of the daily P&L series. The date is the execution day (the open
/// the book was put on), one day after the signal day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub net_return: f64,
    pub gross_return: f64,
    pub turnover: f64,
    /// Gross return contributed by the long leg.
    pub long_return: f64,
    /// Return of the shorted basket (positive weights on the shorted names),
    /// so `gross_return = long_return - short_return`.
    pub short_return: f64,
    pub n_long: usize,
    pub n_short: usize,
}

/// One executed position on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRecord {
    pub date: NaiveDate,
    pub ticker: String,
    pub side: Side,
    pub weight: f64,
}

/// Full output of a backtest run.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub days: Vec<DailyRecord>,
    pub positions: Vec<PositionRecord>,
    /// Completed holding periods: signal days held -> count.
    pub holding_hist: BTreeMap<usize, usize>,
    /// Decided weights per signal day, before execution-gap adjustments.
    /// These depend only on closes up to the signal day.
    pub weights_by_day: Vec<(usize, Vec<f64>)>,
}

/// Settlement of one execution day.
struct Settlement {
    eff: Vec<f64>,
    gross: f64,
    net: f64,
    turnover: f64,
    long_return: f64,
    short_return: f64,
    n_long: usize,
    n_short: usize,
}

/// Marks the decided weights to market over one day.
///
/// Weights whose entry open is missing are zeroed (the trade cannot be
/// executed); a missing exit open settles the position flat (`r = 0`).
/// Turnover compares today's effective weights against yesterday's drifted
/// by the overnight open-to-open move, without renormalizing the drifted
/// book.
fn settle_day(
    panel: &PricePanel,
    decided: &[f64],
    prev_eff: &[f64],
    prev_entry: Option<usize>,
    entry_t: usize,
    exit_t: usize,
    tc_rate: f64,
) -> Settlement {
    let n = decided.len();
    let mut eff = decided.to_vec();
    for (i, w) in eff.iter_mut().enumerate() {
        if *w != 0.0 && !panel.open(entry_t, i).is_finite() {
            *w = 0.0;
        }
    }

    let mut turnover = 0.0;
    for i in 0..n {
        let drifted = match prev_entry {
            Some(pt) if prev_eff[i] != 0.0 => {
                let p0 = panel.open(pt, i);
                let p1 = panel.open(entry_t, i);
                let ratio = if p0.is_finite() && p1.is_finite() { p1 / p0 } else { 1.0 };
                prev_eff[i] * ratio
            }
            _ => 0.0,
        };
        turnover += (eff[i] - drifted).abs();
    }

    let mut long_return = 0.0;
    let mut short_return = 0.0;
    let mut n_long = 0;
    let mut n_short = 0;
    for (i, &w) in eff.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let p_in = panel.open(entry_t, i);
        let p_out = panel.open(exit_t, i);
        let r = if p_in.is_finite() && p_out.is_finite() {
            p_out / p_in - 1.0
        } else {
            0.0
        };
        if w > 0.0 {
            long_return += w * r;
            n_long += 1;
        } else {
            short_return += -w * r;
            n_short += 1;
        }
    }
    let gross = long_return - short_return;
    let net = gross - tc_rate * turnover;
    Settlement {
        eff,
        gross,
        net,
        turnover,
        long_return,
        short_return,
        n_long,
        n_short,
    }
}

/// Tracks contiguous holding runs per security for the holding histogram.
/// A position entered on signal day `e` and absent from the book on signal
/// day `x` was held for `x - e` days; side flips close the old run.
#[derive(Default)]
struct HoldTracker {
    open: BTreeMap<usize, (Side, usize)>,
    hist: BTreeMap<usize, usize>,
}

impl HoldTracker {
    fn observe(&mut self, today: usize, longs: &BTreeSet<usize>, shorts: &BTreeSet<usize>) {
        let closed: Vec<(usize, usize)> = self
            .open
            .iter()
            .filter(|(&i, &(side, _))| match side {
                Side::Long => !longs.contains(&i),
                Side::Short => !shorts.contains(&i),
            })
            .map(|(&i, &(_, entry))| (i, today - entry))
            .collect();
        for (i, held) in closed {
            self.open.remove(&i);
            *self.hist.entry(held).or_insert(0) += 1;
        }
        for &i in longs {
            self.open.entry(i).or_insert((Side::Long, today));
        }
        for &i in shorts {
            self.open.entry(i).or_insert((Side::Short, today));
        }
    }

    /// Closes every run still open after the last signal day.
    fn finish(&mut self, after_last: usize) {
        for (_, (_, entry)) in std::mem::take(&mut self.open) {
            *self.hist.entry(after_last - entry).or_insert(0) += 1;
        }
    }
}

/// Runs the daily loop over every signal day the panel supports.
pub fn run_backtest(
    panel: &PricePanel,
    config: &BacktestConfig,
) -> Result<BacktestReport, BacktestError> {
    config.validate()?;
    let n = panel.n_securities();
    let n_days = panel.n_days();
    let needed = config.lookback + 3;
    if n_days < needed {
        return Err(BacktestError::TooFewDays {
            needed,
            got: n_days,
        });
    }

    let logs = panel.log_closes();
    let mut registry = PositionRegistry::new();
    let mut tracker = HoldTracker::default();
    let mut prev_eff = vec![0.0f64; n];
    let mut prev_entry: Option<usize> = None;
    let mut days = Vec::new();
    let mut positions = Vec::new();
    let mut weights_by_day = Vec::new();

    let last_signal = n_days - 3;
    for t in config.lookback..=last_signal {
        let (utilities, _, fresh) = rank_from_logs(&logs, panel, t, config)?;
        // A security that cannot be scored has utility exactly zero, so the
        // sign rule below also evicts stale holdings with data gaps.
        let book = if config.momentum {
            momentum_update(&mut registry, &utilities, &fresh, t)
        } else {
            fresh
        };
        tracker.observe(t, book.longs(), book.shorts());

        let decided = allocate(&book, &utilities, config.scheme);
        weights_by_day.push((t, decided.as_slice().to_vec()));

        let s = settle_day(
            panel,
            decided.as_slice(),
            &prev_eff,
            prev_entry,
            t + 1,
            t + 2,
            config.tc_rate,
        );
        let date = panel.date(t + 1);
        days.push(DailyRecord {
            date,
            net_return: s.net,
            gross_return: s.gross,
            turnover: s.turnover,
            long_return: s.long_return,
            short_return: s.short_return,
            n_long: s.n_long,
            n_short: s.n_short,
        });
        for (i, &w) in s.eff.iter().enumerate() {
            if w != 0.0 {
                positions.push(PositionRecord {
                    date,
                    ticker: panel.ticker(i).to_string(),
                    side: if w > 0.0 { Side::Long } else { Side::Short },
                    weight: w,
                });
            }
        }
        prev_eff = s.eff;
        prev_entry = Some(t + 1);
    }
    tracker.finish(last_signal + 1);

    Ok(BacktestReport {
        config: config.clone(),
        days,
        positions,
        holding_hist: tracker.hist,
        weights_by_day,
    })
}

/// Aggregate statistics of a backtest, annualized where meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n_days: usize,
    pub mean_daily_net: f64,
    pub ann_mean: f64,
    pub ann_std: f64,
    /// `mean / (std / sqrt(n))` of the daily net series; zero when the
    /// variance is degenerate.
    pub t_stat: f64,
    pub gross_ann_mean: f64,
    pub mean_turnover: f64,
    pub median_holding_days: f64,
    /// Set when the net series has fewer than two days or zero variance,
    /// in which case `t_stat` is reported as zero.
    pub degenerate_variance: bool,
}

fn median_from_hist(hist: &BTreeMap<usize, usize>) -> f64 {
    let total: usize = hist.values().sum();
    if total == 0 {
        return 0.0;
    }
    let pick = |rank: usize| -> f64 {
        let mut seen = 0;
        for (&days, &count) in hist {
            seen += count;
            if seen > rank {
                return days as f64;
            }
        }
        unreachable!("rank below total count")
    };
    if total % 2 == 1 {
        pick(total / 2)
    } else {
        (pick(total / 2 - 1) + pick(total / 2)) / 2.0
    }
}

/// Summarizes a backtest report into annualized statistics.
pub fn summarize(report: &BacktestReport) -> SummaryStats {
    let n = report.days.len();
    let nets: Vec<f64> = report.days.iter().map(|d| d.net_return).collect();
    let mean = if n == 0 { 0.0 } else { nets.iter().sum::<f64>() / n as f64 };
    let var = if n >= 2 {
        nets.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut std = var.sqrt();
    // An exactly constant series is degenerate even when accumulating the
    // mean leaves rounding residue in the variance.
    let degenerate = n < 2 || nets.iter().all(|&x| x == nets[0]);
    if degenerate {
        std = 0.0;
    }
    let t_stat = if degenerate {
        0.0
    } else {
        mean / (std / (n as f64).sqrt())
    };
    let gross_mean = if n == 0 {
        0.0
    } else {
        report.days.iter().map(|d| d.gross_return).sum::<f64>() / n as f64
    };
    let mean_turnover = if n == 0 {
        0.0
    } else {
        report.days.iter().map(|d| d.turnover).sum::<f64>() / n as f64
    };
    SummaryStats {
        n_days: n,
        mean_daily_net: mean,
        ann_mean: TRADING_DAYS_PER_YEAR * mean,
        ann_std: TRADING_DAYS_PER_YEAR.sqrt() * std,
        t_stat,
        gross_ann_mean: TRADING_DAYS_PER_YEAR * gross_mean,
        mean_turnover,
        median_holding_days: median_from_hist(&report.holding_hist),
        degenerate_variance: degenerate,
    }
}

/// Nearest-rank percentiles at 2.5%, 50%, and 97.5%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileTriple {
    pub p2_5: f64,
    pub median: f64,
    pub p97_5: f64,
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

fn quantile_triple(values: &[f64]) -> QuantileTriple {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("summary statistics are finite"));
    QuantileTriple {
        p2_5: nearest_rank(&sorted, 2.5),
        median: nearest_rank(&sorted, 50.0),
        p97_5: nearest_rank(&sorted, 97.5),
    }
}

/// Statistics of one bootstrap sample (one security subset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub sample: usize,
    pub net_ann_mean: f64,
    pub net_ann_std: f64,
    pub net_t_stat: f64,
    pub gross_ann_mean: f64,
}

/// Percentile summary over all bootstrap samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_samples: usize,
    pub subset_size: usize,
    pub net_ann_mean: QuantileTriple,
    pub gross_ann_mean: QuantileTriple,
    pub net_t_stat: QuantileTriple,
}

/// Bootstrap samples plus their percentile summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapStudy {
    pub samples: Vec<SampleStats>,
    pub summary: BootstrapSummary,
}

/// Reruns the backtest on `n_samples` random subsets of `subset_size`
/// securities (drawn without replacement within a sample).
///
/// Sampling is keyed to `config.seed` with one independent generator stream
/// per sample index, and results are collected in sample order, so the study
/// is reproducible regardless of how many threads execute it.
pub fn bootstrap_study(
    panel: &PricePanel,
    config: &BacktestConfig,
    subset_size: usize,
    n_samples: usize,
) -> Result<BootstrapStudy, BacktestError> {
    config.validate()?;
    let n = panel.n_securities();
    if subset_size < 2 || subset_size > n {
        return Err(BacktestError::Config(format!(
            "subset_size must be in [2, {n}], got {subset_size}"
        )));
    }
    if n_samples == 0 {
        return Err(BacktestError::Config("n_samples must be positive".to_string()));
    }

    let samples: Vec<SampleStats> = (0..n_samples)
        .into_par_iter()
        .map(|s| -> Result<SampleStats, BacktestError> {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(s as u64);
            let mut idx = rand::seq::index::sample(&mut rng, n, subset_size).into_vec();
            idx.sort_unstable();
            let subset = panel.column_subset(&idx);
            let report = run_backtest(&subset, config)?;
            let stats = summarize(&report);
            Ok(SampleStats {
                sample: s,
                net_ann_mean: stats.ann_mean,
                net_ann_std: stats.ann_std,
                net_t_stat: stats.t_stat,
                gross_ann_mean: stats.gross_ann_mean,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let net: Vec<f64> = samples.iter().map(|s| s.net_ann_mean).collect();
    let gross: Vec<f64> = samples.iter().map(|s| s.gross_ann_mean).collect();
    let t: Vec<f64> = samples.iter().map(|s| s.net_t_stat).collect();
    let summary = BootstrapSummary {
        n_samples,
        subset_size,
        net_ann_mean: quantile_triple(&net),
        gross_ann_mean: quantile_triple(&gross),
        net_t_stat: quantile_triple(&t),
    };
    Ok(BootstrapStudy { samples, summary })
}

//! Pairwise-preference statistical arbitrage toolkit.
//!
//! The pipeline turns noisy, possibly contradictory pairwise trading signals
//! into a consistent ranking and a tradable long-short portfolio:
//!
//! 1. [`signal`] standardizes log price spreads into a pairwise preference
//!    matrix,
//! 2. [`potential`] projects the pairwise values onto the nearest consistent
//!    utility scale (least squares over the complete comparison graph),
//! 3. [`graph`] thresholds the implied preference graph and prunes it down to
//!    extreme long/short candidates,
//! 4. [`portfolio`] sizes the candidates into a zero-investment portfolio and
//!    optionally holds positions until their utility flips sign,
//! 5. [`backtest`] runs the daily loop with transaction costs, plus bootstrap
//!    resampling over security subsets,
//! 6. [`regression`] exposes factor regressions for the resulting return
//!    series, and [`estimator`] checks the statistical properties of the
//!    utility estimator by Monte Carlo.
//!
//! [`market`] supplies the price panels: CSV files or synthetic cluster
//! markets with mean-reverting intra-cluster spreads. [`report`] writes the
//! standard output files (summary JSON, daily/positions/histogram CSVs).

pub mod backtest;
pub mod estimator;
pub mod graph;
pub mod market;
pub mod portfolio;
pub mod potential;
pub mod regression;
pub mod report;
pub mod signal;

pub use backtest::{
    bootstrap_study, rank_date, run_backtest, summarize, BacktestConfig, BacktestError,
    BacktestReport, BootstrapStudy, BootstrapSummary, DailyRecord, PositionRecord, QuantileTriple,
    SampleStats, SummaryStats,
};
pub use estimator::{bias_test, simulate_estimator, EstimatorError, EstimatorRun, NoiseModel};
pub use graph::{
    build_graph, prune_intermediate, select_vertices, threshold_edges, Edge, GraphError,
    PreferenceGraph, TradeSignalSet,
};
pub use market::{generate_synthetic, load_panel, write_panel, PanelError, PricePanel,
    SyntheticMarketSpec};
pub use portfolio::{
    allocate, momentum_update, PortfolioWeights, PositionRegistry, Side, WeightScheme,
};
pub use potential::{
    consistent_preferences, solve_utilities, ConsistentPreferences, PotentialError, UtilityVector,
};
pub use regression::{
    factor_regression, load_factors, FactorBeta, FactorPanel, FactorRegressionResult,
    RegressionError,
};
pub use signal::{
    pair_index, preference_matrix, window_stats, EstimatorConvention, Orientation,
    PreferenceMatrix, SignalError,
};

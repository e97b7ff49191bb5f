//! `prefarb` — command-line driver for the pairwise-preference trading
//! toolkit.
//!
//! Every command resolves its configuration the same way: built-in defaults,
//! then an optional JSON file (`--config`, either a bare config or a
//! previously written `manifest.json`), then individual CLI flags. Each run
//! writes a `manifest.json` into the output directory; re-running the same
//! command with `--config <that manifest>` reproduces the outputs
//! byte-for-byte.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/configuration error.

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use prefarb::market::write_panel;
use prefarb::portfolio::allocate;
use prefarb::report;
use prefarb::signal::{EstimatorConvention, Orientation};
use prefarb::{
    bias_test, bootstrap_study, factor_regression, generate_synthetic, load_factors, load_panel,
    rank_date, run_backtest, simulate_estimator, summarize, BacktestConfig, EstimatorRun,
    NoiseModel, SyntheticMarketSpec, WeightScheme,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Backtest(#[from] prefarb::BacktestError),
    #[error(transparent)]
    Panel(#[from] prefarb::PanelError),
    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Estimator(#[from] prefarb::EstimatorError),
    #[error(transparent)]
    Regression(#[from] prefarb::RegressionError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Parser)]
#[command(
    name = "prefarb",
    version,
    about = "Pairwise preference signals, utility ranking, and long-short backtesting"
)]
struct Cli {
    /// Cap the number of worker threads for parallel studies.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank one date: utilities, surviving edges, and long/short signals.
    Rank(RankArgs),
    /// Run the daily long-short backtest over a price panel.
    Backtest(BacktestArgs),
    /// Rerun the backtest on random security subsets and summarize.
    Bootstrap(BootstrapArgs),
    /// Generate a synthetic clustered price panel.
    Simulate(SimulateArgs),
    /// Monte Carlo check of the utility estimator against closed forms.
    ValidateEstimator(ValidateArgs),
    /// Regress a backtest return series on a factor panel.
    Regress(RegressArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Equal,
    UtilityProportional,
}

impl From<SchemeArg> for WeightScheme {
    fn from(v: SchemeArg) -> Self {
        match v {
            SchemeArg::Equal => WeightScheme::Equal,
            SchemeArg::UtilityProportional => WeightScheme::UtilityProportional,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Standard,
    Recursive,
}

impl From<ConventionArg> for EstimatorConvention {
    fn from(v: ConventionArg) -> Self {
        match v {
            ConventionArg::Standard => EstimatorConvention::Standard,
            ConventionArg::Recursive => EstimatorConvention::Recursive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    Contrarian,
    Continuation,
}

impl From<OrientationArg> for Orientation {
    fn from(v: OrientationArg) -> Self {
        match v {
            OrientationArg::Contrarian => Orientation::Contrarian,
            OrientationArg::Continuation => Orientation::Continuation,
        }
    }
}

/// Configuration sources shared by the pipeline commands.
#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration: a bare config object or a saved manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lookback: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    n_top: Option<usize>,
    #[arg(long)]
    m_bottom: Option<usize>,
    #[arg(long)]
    tc_rate: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Hold positions until their utility flips sign (true/false).
    #[arg(long)]
    momentum: Option<bool>,
    #[arg(long, value_enum)]
    estimator_convention: Option<ConventionArg>,
    #[arg(long, value_enum)]
    orientation: Option<OrientationArg>,
    /// Master seed for randomized studies.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Price panel CSV (date,ticker,open,close).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Signal date (must be in the panel with enough history before it).
    #[arg(long)]
    date: NaiveDate,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Securities per bootstrap subset.
    #[arg(long)]
    subset_size: Option<usize>,
    /// Number of bootstrap subsets.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON spec: a bare synthetic-market object or a saved manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_securities: Option<usize>,
    #[arg(long)]
    n_days: Option<usize>,
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    spread_reversion: Option<f64>,
    #[arg(long)]
    spread_vol: Option<f64>,
    #[arg(long)]
    market_vol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// JSON configuration: a bare config object or a saved manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Universe sizes to test (repeatable or comma-separated).
    #[arg(long = "n", value_delimiter = ',', num_args = 1..)]
    n_list: Option<Vec<usize>>,
    /// Cross-pair noise covariances to test (repeatable or comma-separated).
    #[arg(long = "cov", value_delimiter = ',', num_args = 1..)]
    cov_list: Option<Vec<f64>>,
    /// Noise standard deviation per pair.
    #[arg(long)]
    sigma: Option<f64>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeriesArg {
    Net,
    Gross,
}

#[derive(Args)]
struct RegressArgs {
    /// JSON configuration: a saved manifest.json from a previous regress run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Daily return series CSV as written by `backtest` (daily.csv).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Factor panel CSV: `date` column plus one column per factor.
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Which return column to regress.
    #[arg(long, value_enum)]
    series: Option<SeriesArg>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Grid of a `validate-estimator` run, stored in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct EstimatorGrid {
    n: Vec<usize>,
    cov: Vec<f64>,
    sigma: f64,
    trials: usize,
}

/// Everything needed to reproduce a run. Written to
/// `<out>/manifest.json`; accepted back through `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_path: Option<PathBuf>,
    output_dir: PathBuf,
    config: BacktestConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    date: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subset_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic: Option<SyntheticMarketSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimator: Option<EstimatorGrid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    factors_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    series: Option<String>,
}

impl RunManifest {
    fn new(command: &str, config: BacktestConfig, out: &Path) -> Self {
        Self {
            command: command.to_string(),
            data_path: None,
            output_dir: out.to_path_buf(),
            config,
            date: None,
            subset_size: None,
            samples: None,
            synthetic: None,
            estimator: None,
            factors_path: None,
            series: None,
        }
    }
}

fn read_json_file(path: &Path) -> Result<serde_json::Value, AppError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| AppError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `--config` as either a saved manifest (recognized by its
/// `command` key) or a bare configuration object of type `C`.
fn load_config_file<C: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<(Option<C>, Option<RunManifest>), AppError> {
    let value = read_json_file(path)?;
    if value.get("command").is_some() {
        let manifest: RunManifest =
            serde_json::from_value(value).map_err(|source| AppError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        Ok((None, Some(manifest)))
    } else {
        let config: C = serde_json::from_value(value).map_err(|source| AppError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok((Some(config), None))
    }
}

/// Defaults -> config file (or manifest) -> individual flags.
fn resolve_config(args: &ConfigArgs) -> Result<(BacktestConfig, Option<RunManifest>), AppError> {
    let mut config = BacktestConfig::default();
    let mut manifest = None;
    if let Some(path) = &args.config {
        let (bare, from_manifest) = load_config_file::<BacktestConfig>(path)?;
        if let Some(c) = bare {
            config = c;
        }
        if let Some(m) = from_manifest {
            config = m.config.clone();
            manifest = Some(m);
        }
    }
    if let Some(v) = args.lookback {
        config.lookback = v;
    }
    if let Some(v) = args.kappa {
        config.kappa = v;
    }
    if let Some(v) = args.n_top {
        config.n_top = v;
    }
    if let Some(v) = args.m_bottom {
        config.m_bottom = v;
    }
    if let Some(v) = args.tc_rate {
        config.tc_rate = v;
    }
    if let Some(v) = args.scheme {
        config.scheme = v.into();
    }
    if let Some(v) = args.momentum {
        config.momentum = v;
    }
    if let Some(v) = args.estimator_convention {
        config.estimator_convention = v.into();
    }
    if let Some(v) = args.orientation {
        config.orientation = v.into();
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    config.validate()?;
    Ok((config, manifest))
}

fn require_data(
    flag: &Option<PathBuf>,
    manifest: &Option<RunManifest>,
) -> Result<PathBuf, AppError> {
    flag.clone()
        .or_else(|| manifest.as_ref().and_then(|m| m.data_path.clone()))
        .ok_or_else(|| {
            AppError::Invalid("no price panel given: pass --data or a manifest".to_string())
        })
}

fn write_manifest(manifest: &RunManifest, out: &Path) -> Result<(), AppError> {
    report::write_json(manifest, out.join("manifest.json"))?;
    Ok(())
}

fn load_panel_at(path: &Path) -> Result<prefarb::PricePanel, AppError> {
    load_panel(path).map_err(|e| AppError::Data {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

fn load_factors_at(path: &Path) -> Result<prefarb::FactorPanel, AppError> {
    load_factors(path).map_err(|e| AppError::Data {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

fn cmd_rank(args: RankArgs) -> Result<(), AppError> {
    let (config, manifest_in) = resolve_config(&args.config)?;
    let data = require_data(&args.data, &manifest_in)?;
    let panel = load_panel_at(&data)?;
    let t = panel.index_of_date(args.date).ok_or_else(|| {
        AppError::Invalid(format!("date {} is not a trading day in the panel", args.date))
    })?;
    let (utilities, graph, signals) = rank_date(&panel, t, &config)?;
    let weights = allocate(&signals, &utilities, config.scheme);

    std::fs::create_dir_all(&args.out)?;
    report::write_utilities(panel.tickers(), &utilities, args.out.join("utilities.csv"))?;
    report::write_edges(panel.tickers(), graph.edges(), args.out.join("edges.csv"))?;

    let leg = |members: &std::collections::BTreeSet<usize>| -> Vec<serde_json::Value> {
        members
            .iter()
            .map(|&i| {
                serde_json::json!({
                    "ticker": panel.ticker(i),
                    "utility": utilities.get(i),
                    "weight": weights.get(i),
                })
            })
            .collect()
    };
    let signal_doc = serde_json::json!({
        "date": args.date,
        "longs": leg(signals.longs()),
        "shorts": leg(signals.shorts()),
    });
    report::write_json(&signal_doc, args.out.join("signals.json"))?;

    let mut manifest = RunManifest::new("rank", config, &args.out);
    manifest.data_path = Some(data);
    manifest.date = Some(args.date);
    write_manifest(&manifest, &args.out)
}

fn cmd_backtest(args: BacktestArgs) -> Result<(), AppError> {
    let (config, manifest_in) = resolve_config(&args.config)?;
    let data = require_data(&args.data, &manifest_in)?;
    let panel = load_panel_at(&data)?;
    let report_out = run_backtest(&panel, &config)?;
    let stats = summarize(&report_out);

    std::fs::create_dir_all(&args.out)?;
    report::write_daily(&report_out, args.out.join("daily.csv"))?;
    report::write_positions(&report_out, args.out.join("positions.csv"))?;
    report::write_holding_hist(&report_out.holding_hist, args.out.join("holding_hist.csv"))?;
    report::write_json(&stats, args.out.join("summary.json"))?;

    let mut manifest = RunManifest::new("backtest", config, &args.out);
    manifest.data_path = Some(data);
    write_manifest(&manifest, &args.out)
}

fn cmd_bootstrap(args: BootstrapArgs) -> Result<(), AppError> {
    let (config, manifest_in) = resolve_config(&args.config)?;
    let data = require_data(&args.data, &manifest_in)?;
    let from_manifest = |f: fn(&RunManifest) -> Option<usize>| {
        manifest_in.as_ref().and_then(f)
    };
    let subset_size = args
        .subset_size
        .or(from_manifest(|m| m.subset_size))
        .ok_or_else(|| AppError::Invalid("--subset-size is required".to_string()))?;
    let samples = args
        .samples
        .or(from_manifest(|m| m.samples))
        .ok_or_else(|| AppError::Invalid("--samples is required".to_string()))?;

    let panel = load_panel_at(&data)?;
    let study = bootstrap_study(&panel, &config, subset_size, samples)?;

    std::fs::create_dir_all(&args.out)?;
    report::write_samples(&study.samples, args.out.join("samples.csv"))?;
    report::write_json(&study.summary, args.out.join("summary.json"))?;

    let mut manifest = RunManifest::new("bootstrap", config, &args.out);
    manifest.data_path = Some(data);
    manifest.subset_size = Some(subset_size);
    manifest.samples = Some(samples);
    write_manifest(&manifest, &args.out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), AppError> {
    let mut spec = SyntheticMarketSpec::default();
    if let Some(path) = &args.config {
        let (bare, from_manifest) = load_config_file::<SyntheticMarketSpec>(path)?;
        if let Some(s) = bare {
            spec = s;
        }
        if let Some(m) = from_manifest {
            spec = m.synthetic.ok_or_else(|| {
                AppError::Invalid(format!(
                    "manifest {} has no synthetic market spec",
                    path.display()
                ))
            })?;
        }
    }
    if let Some(v) = args.n_securities {
        spec.n_securities = v;
    }
    if let Some(v) = args.n_days {
        spec.n_days = v;
    }
    if let Some(v) = args.n_clusters {
        spec.n_clusters = v;
    }
    if let Some(v) = args.spread_reversion {
        spec.spread_reversion = v;
    }
    if let Some(v) = args.spread_vol {
        spec.spread_vol = v;
    }
    if let Some(v) = args.market_vol {
        spec.market_vol = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }

    let panel = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let panel_path = args.out.join("panel.csv");
    write_panel(&panel, &panel_path)?;

    let mut manifest = RunManifest::new("simulate", BacktestConfig::default(), &args.out);
    manifest.data_path = Some(panel_path);
    manifest.synthetic = Some(spec);
    write_manifest(&manifest, &args.out)
}

fn cmd_validate(args: ValidateArgs) -> Result<(), AppError> {
    let mut grid = EstimatorGrid {
        n: vec![100],
        cov: vec![0.0],
        sigma: 1.0,
        trials: 10_000,
    };
    let mut seed = BacktestConfig::default().seed;
    if let Some(path) = &args.config {
        // Bare configs are not meaningful here; only manifests carry a grid.
        let value = read_json_file(path)?;
        let manifest: RunManifest =
            serde_json::from_value(value).map_err(|source| AppError::Json {
                path: path.clone(),
                source,
            })?;
        seed = manifest.config.seed;
        grid = manifest.estimator.ok_or_else(|| {
            AppError::Invalid(format!(
                "manifest {} has no estimator grid",
                path.display()
            ))
        })?;
    }
    if let Some(v) = args.n_list.clone() {
        grid.n = v;
    }
    if let Some(v) = args.cov_list.clone() {
        grid.cov = v;
    }
    if let Some(v) = args.sigma {
        grid.sigma = v;
    }
    if let Some(v) = args.trials {
        grid.trials = v;
    }
    if let Some(v) = args.seed {
        seed = v;
    }

    let mut runs: Vec<EstimatorRun> = Vec::new();
    for &n in &grid.n {
        for &cov in &grid.cov {
            let model = NoiseModel {
                n_securities: n,
                sigma: grid.sigma,
                cov,
            };
            runs.push(simulate_estimator(&model, grid.trials, seed)?);
        }
    }

    std::fs::create_dir_all(&args.out)?;
    report::write_variance_study(&runs, args.out.join("variance_study.csv"))?;
    let rows: Vec<serde_json::Value> = runs
        .iter()
        .map(|r| {
            let verdict = bias_test(r);
            serde_json::json!({
                "n": r.n_securities,
                "cov": r.cov,
                "sigma": r.sigma,
                "trials": r.n_trials,
                "theoretical_utility_variance": r.theoretical_utility_variance,
                "empirical_utility_variance": r.mean_utility_variance,
                "theoretical_preference_variance": r.theoretical_preference_variance,
                "empirical_preference_variance": r.mean_preference_variance,
                "max_abs_standardized_bias": r.max_abs_standardized_bias,
                "unbiased": verdict.unbiased,
            })
        })
        .collect();
    let all_unbiased = runs
        .iter()
        .all(|r| bias_test(r).unbiased);
    let summary = serde_json::json!({
        "runs": rows,
        "all_unbiased": all_unbiased,
    });
    report::write_json(&summary, args.out.join("summary.json"))?;

    let config = BacktestConfig {
        seed,
        ..BacktestConfig::default()
    };
    let mut manifest = RunManifest::new("validate-estimator", config, &args.out);
    manifest.estimator = Some(grid);
    write_manifest(&manifest, &args.out)
}

/// Reads `date` plus the requested return column out of a daily.csv.
fn load_return_series(
    path: &Path,
    series: SeriesArg,
) -> Result<(Vec<NaiveDate>, Vec<f64>), AppError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| AppError::Invalid(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let want = match series {
        SeriesArg::Net => "net_return",
        SeriesArg::Gross => "gross_return",
    };
    let date_col = columns.iter().position(|c| *c == "date").ok_or_else(|| {
        AppError::Invalid(format!("{}: no `date` column", path.display()))
    })?;
    let ret_col = columns.iter().position(|c| *c == want).ok_or_else(|| {
        AppError::Invalid(format!("{}: no `{want}` column", path.display()))
    })?;
    let mut dates = Vec::new();
    let mut returns = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let context = |msg: String| AppError::Invalid(format!("{} line {}: {msg}", path.display(), k + 2));
        let date: NaiveDate = fields
            .get(date_col)
            .ok_or_else(|| context("missing date".to_string()))?
            .parse()
            .map_err(|e| context(format!("bad date: {e}")))?;
        let value: f64 = fields
            .get(ret_col)
            .ok_or_else(|| context(format!("missing {want}")))?
            .parse()
            .map_err(|e| context(format!("bad {want}: {e}")))?;
        dates.push(date);
        returns.push(value);
    }
    Ok((dates, returns))
}

fn cmd_regress(args: RegressArgs) -> Result<(), AppError> {
    let mut manifest_in = None;
    if let Some(path) = &args.config {
        let value = read_json_file(path)?;
        let manifest: RunManifest =
            serde_json::from_value(value).map_err(|source| AppError::Json {
                path: path.clone(),
                source,
            })?;
        manifest_in = Some(manifest);
    }
    let data = require_data(&args.data, &manifest_in)?;
    let factors_path = args
        .factors
        .clone()
        .or_else(|| manifest_in.as_ref().and_then(|m| m.factors_path.clone()))
        .ok_or_else(|| AppError::Invalid("--factors is required".to_string()))?;
    let series = args.series.unwrap_or_else(|| {
        match manifest_in.as_ref().and_then(|m| m.series.as_deref()) {
            Some("gross") => SeriesArg::Gross,
            _ => SeriesArg::Net,
        }
    });

    let (dates, returns) = load_return_series(&data, series)?;
    let factors = load_factors_at(&factors_path)?;
    let fit = factor_regression(&dates, &returns, &factors)?;

    std::fs::create_dir_all(&args.out)?;
    report::write_json(&fit, args.out.join("regression.json"))?;

    let mut manifest = RunManifest::new("regress", BacktestConfig::default(), &args.out);
    manifest.data_path = Some(data);
    manifest.factors_path = Some(factors_path);
    manifest.series = Some(
        match series {
            SeriesArg::Net => "net",
            SeriesArg::Gross => "gross",
        }
        .to_string(),
    );
    write_manifest(&manifest, &args.out)
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Rank(args) => cmd_rank(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Bootstrap(args) => cmd_bootstrap(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::ValidateEstimator(args) => cmd_validate(args),
        Command::Regress(args) => cmd_regress(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

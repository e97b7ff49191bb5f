//! Writers for the standard output files.
//!
//! Every writer is generic over `io::Write` and has a path-based wrapper.
//! Floats are printed with Rust's shortest round-trip formatting, so files
//! written from identical runs are byte-identical.

use crate::backtest::{BacktestReport, SampleStats};
use crate::estimator::EstimatorRun;
use crate::graph::Edge;
use crate::potential::UtilityVector;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn to_file<F>(path: &Path, write: F) -> Result<(), ReportError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), ReportError>,
{
    let mut out = BufWriter::new(File::create(path)?);
    write(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Daily P&L series: one row per execution day.
pub fn dump_daily<W: Write>(report: &BacktestReport, out: &mut W) -> Result<(), ReportError> {
    writeln!(
        out,
        "date,net_return,gross_return,turnover,long_return,short_return,n_long,n_short"
    )?;
    for d in &report.days {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.date.format("%Y-%m-%d"),
            d.net_return,
            d.gross_return,
            d.turnover,
            d.long_return,
            d.short_return,
            d.n_long,
            d.n_short
        )?;
    }
    Ok(())
}

pub fn write_daily(report: &BacktestReport, path: impl AsRef<Path>) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_daily(report, out))
}

/// Executed positions: one row per (execution day, security) actually held.
pub fn dump_positions<W: Write>(report: &BacktestReport, out: &mut W) -> Result<(), ReportError> {
    writeln!(out, "date,ticker,side,weight")?;
    for p in &report.positions {
        writeln!(
            out,
            "{},{},{},{}",
            p.date.format("%Y-%m-%d"),
            p.ticker,
            p.side,
            p.weight
        )?;
    }
    Ok(())
}

pub fn write_positions(
    report: &BacktestReport,
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_positions(report, out))
}

/// Holding-period histogram: `days,count`, ascending in days.
pub fn dump_holding_hist<W: Write>(
    hist: &BTreeMap<usize, usize>,
    out: &mut W,
) -> Result<(), ReportError> {
    writeln!(out, "days,count")?;
    for (days, count) in hist {
        writeln!(out, "{days},{count}")?;
    }
    Ok(())
}

pub fn write_holding_hist(
    hist: &BTreeMap<usize, usize>,
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_holding_hist(hist, out))
}

/// Bootstrap samples, one row per subset.
pub fn dump_samples<W: Write>(samples: &[SampleStats], out: &mut W) -> Result<(), ReportError> {
    writeln!(out, "sample,net_ann_mean,net_ann_std,net_t_stat,gross_ann_mean")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.sample, s.net_ann_mean, s.net_ann_std, s.net_t_stat, s.gross_ann_mean
        )?;
    }
    Ok(())
}

pub fn write_samples(samples: &[SampleStats], path: impl AsRef<Path>) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_samples(samples, out))
}

/// Variance study grid: one row per Monte Carlo run, utility-estimator
/// variances averaged over securities.
pub fn dump_variance_study<W: Write>(
    runs: &[EstimatorRun],
    out: &mut W,
) -> Result<(), ReportError> {
    writeln!(out, "n,cov,theoretical_var,empirical_var")?;
    for r in runs {
        writeln!(
            out,
            "{},{},{},{}",
            r.n_securities, r.cov, r.theoretical_utility_variance, r.mean_utility_variance
        )?;
    }
    Ok(())
}

pub fn write_variance_study(
    runs: &[EstimatorRun],
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_variance_study(runs, out))
}

/// Ranked utilities: `ticker,utility`, in security order.
pub fn dump_utilities<W: Write>(
    tickers: &[String],
    utilities: &UtilityVector,
    out: &mut W,
) -> Result<(), ReportError> {
    assert_eq!(tickers.len(), utilities.len());
    writeln!(out, "ticker,utility")?;
    for (t, u) in tickers.iter().zip(utilities.as_slice()) {
        writeln!(out, "{t},{u}")?;
    }
    Ok(())
}

pub fn write_utilities(
    tickers: &[String],
    utilities: &UtilityVector,
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_utilities(tickers, utilities, out))
}

/// Graph edges with endpoints resolved to tickers: `from,to,weight`.
pub fn dump_edges<W: Write>(
    tickers: &[String],
    edges: &[Edge],
    out: &mut W,
) -> Result<(), ReportError> {
    writeln!(out, "from,to,weight")?;
    for e in edges {
        writeln!(out, "{},{},{}", tickers[e.from], tickers[e.to], e.weight)?;
    }
    Ok(())
}

pub fn write_edges(
    tickers: &[String],
    edges: &[Edge],
    path: impl AsRef<Path>,
) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_edges(tickers, edges, out))
}

/// Pretty-printed JSON with a trailing newline.
pub fn dump_json<T: Serialize, W: Write>(value: &T, out: &mut W) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), ReportError> {
    to_file(path.as_ref(), |out| dump_json(value, out))
}

//! Price panels: CSV input/output and synthetic cluster markets.
//!
//! A [`PricePanel`] is a rectangular open/close panel over a trading
//! calendar. Cells may be missing (a security that has not listed yet, a
//! halted day, a delisting); everything downstream treats a cell as usable
//! only when *both* its open and its close were observed.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PanelError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: non-positive {field} {value} for {ticker} on {date}")]
    NonPositivePrice {
        line: u64,
        field: &'static str,
        value: f64,
        ticker: String,
        date: NaiveDate,
    },
    #[error("line {line}: duplicate row for {ticker} on {date}")]
    DuplicateRow {
        line: u64,
        ticker: String,
        date: NaiveDate,
    },
    #[error("panel contains no observations")]
    EmptyPanel,
    #[error("inconsistent panel shape: {0}")]
    Shape(String),
    #[error("invalid synthetic market spec: {0}")]
    InvalidSpec(String),
}

/// Open/close prices for a set of securities over a shared date index.
///
/// Stored row-major by date; unobserved prices are `NaN` and the `valid`
/// mask records where both prices of a cell were observed.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    open: Vec<f64>,
    close: Vec<f64>,
    valid: Vec<bool>,
}

impl PricePanel {
    /// Builds a panel from raw matrices. `open`/`close` are row-major
    /// `n_days * n_securities` with `NaN` marking missing observations.
    pub fn new(
        dates: Vec<NaiveDate>,
        tickers: Vec<String>,
        open: Vec<f64>,
        close: Vec<f64>,
    ) -> Result<Self, PanelError> {
        if dates.is_empty() || tickers.is_empty() {
            return Err(PanelError::EmptyPanel);
        }
        let cells = dates.len() * tickers.len();
        if open.len() != cells || close.len() != cells {
            return Err(PanelError::Shape(format!(
                "expected {} cells ({} dates x {} tickers), got open={} close={}",
                cells,
                dates.len(),
                tickers.len(),
                open.len(),
                close.len()
            )));
        }
        if !dates.windows(2).all(|w| w[0] < w[1]) {
            return Err(PanelError::Shape(
                "dates must be strictly increasing".to_string(),
            ));
        }
        {
            let mut seen = std::collections::HashSet::new();
            for t in &tickers {
                if !seen.insert(t.as_str()) {
                    return Err(PanelError::Shape(format!("duplicate ticker {t:?}")));
                }
            }
        }
        for (k, (&o, &c)) in open.iter().zip(close.iter()).enumerate() {
            for (field, v) in [("open", o), ("close", c)] {
                if !v.is_nan() && v <= 0.0 {
                    return Err(PanelError::NonPositivePrice {
                        line: 0,
                        field,
                        value: v,
                        ticker: tickers[k % tickers.len()].clone(),
                        date: dates[k / tickers.len()],
                    });
                }
            }
        }
        let valid = open
            .iter()
            .zip(close.iter())
            .map(|(o, c)| o.is_finite() && c.is_finite())
            .collect();
        Ok(Self {
            dates,
            tickers,
            open,
            close,
            valid,
        })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_securities(&self) -> usize {
        self.tickers.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.dates[t]
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn ticker(&self, i: usize) -> &str {
        &self.tickers[i]
    }

    pub fn index_of_date(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn index_of_ticker(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    #[inline]
    pub fn open(&self, t: usize, i: usize) -> f64 {
        self.open[t * self.tickers.len() + i]
    }

    #[inline]
    pub fn close(&self, t: usize, i: usize) -> f64 {
        self.close[t * self.tickers.len() + i]
    }

    /// True when both the open and the close of the cell were observed.
    #[inline]
    pub fn is_valid(&self, t: usize, i: usize) -> bool {
        self.valid[t * self.tickers.len() + i]
    }

    /// Natural log of every close, `NaN` where the cell is invalid.
    /// Row-major, same layout as the panel itself.
    pub fn log_closes(&self) -> Vec<f64> {
        self.close
            .iter()
            .zip(self.valid.iter())
            .map(|(&c, &v)| if v { c.ln() } else { f64::NAN })
            .collect()
    }

    /// Restricts the panel to the given security columns (same date index).
    ///
    /// Panics if an index is out of range or repeated; callers sample the
    /// indices themselves and are expected to pass a valid subset.
    pub fn column_subset(&self, indices: &[usize]) -> PricePanel {
        let n = self.tickers.len();
        let mut seen = vec![false; n];
        for &i in indices {
            assert!(i < n, "column index {i} out of range for {n} securities");
            assert!(!seen[i], "column index {i} repeated");
            seen[i] = true;
        }
        let mut open = Vec::with_capacity(self.dates.len() * indices.len());
        let mut close = Vec::with_capacity(self.dates.len() * indices.len());
        let mut valid = Vec::with_capacity(self.dates.len() * indices.len());
        for t in 0..self.dates.len() {
            for &i in indices {
                open.push(self.open[t * n + i]);
                close.push(self.close[t * n + i]);
                valid.push(self.valid[t * n + i]);
            }
        }
        PricePanel {
            dates: self.dates.clone(),
            tickers: indices.iter().map(|&i| self.tickers[i].clone()).collect(),
            open,
            close,
            valid,
        }
    }
}

const PANEL_HEADER: [&str; 4] = ["date", "ticker", "open", "close"];

/// Loads a long-format panel CSV with header `date,ticker,open,close`.
///
/// Blank price cells mark missing observations; a (date, ticker) pair that
/// never appears is missing entirely. Ticker order follows first appearance
/// in the file; dates are sorted ascending.
pub fn load_panel<P: AsRef<Path>>(path: P) -> Result<PricePanel, PanelError> {
    read_panel(BufReader::new(File::open(path)?))
}

/// Same as [`load_panel`] but from any reader, for in-memory round trips.
pub fn read_panel<R: Read>(reader: R) -> Result<PricePanel, PanelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers()?;
        let got: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if got != PANEL_HEADER {
            return Err(PanelError::Parse {
                line: 1,
                msg: format!("expected header {:?}, got {:?}", PANEL_HEADER.join(","), got.join(",")),
            });
        }
    }

    let mut tickers: Vec<String> = Vec::new();
    let mut ticker_idx: HashMap<String, usize> = HashMap::new();
    let mut rows: HashMap<(NaiveDate, usize), (f64, f64, u64)> = HashMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(PanelError::Parse {
                line,
                msg: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d").map_err(|e| {
            PanelError::Parse {
                line,
                msg: format!("bad date {:?}: {e}", &record[0]),
            }
        })?;
        let ticker = record[1].trim();
        if ticker.is_empty() {
            return Err(PanelError::Parse {
                line,
                msg: "empty ticker".to_string(),
            });
        }
        let parse_price = |field: &'static str, raw: &str| -> Result<f64, PanelError> {
            let raw = raw.trim();
            if raw.is_empty() {
                return Ok(f64::NAN);
            }
            let v: f64 = raw.parse().map_err(|e| PanelError::Parse {
                line,
                msg: format!("bad {field} {raw:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(PanelError::Parse {
                    line,
                    msg: format!("non-finite {field} {raw:?}"),
                });
            }
            if v <= 0.0 {
                return Err(PanelError::NonPositivePrice {
                    line,
                    field,
                    value: v,
                    ticker: ticker.to_string(),
                    date,
                });
            }
            Ok(v)
        };
        let open = parse_price("open", &record[2])?;
        let close = parse_price("close", &record[3])?;

        let idx = match ticker_idx.get(ticker) {
            Some(&i) => i,
            None => {
                let i = tickers.len();
                tickers.push(ticker.to_string());
                ticker_idx.insert(ticker.to_string(), i);
                i
            }
        };
        if rows.insert((date, idx), (open, close, line)).is_some() {
            return Err(PanelError::DuplicateRow {
                line,
                ticker: ticker.to_string(),
                date,
            });
        }
    }

    if rows.is_empty() {
        return Err(PanelError::EmptyPanel);
    }

    let mut dates: Vec<NaiveDate> = rows.keys().map(|&(d, _)| d).collect();
    dates.sort_unstable();
    dates.dedup();
    let date_idx: HashMap<NaiveDate, usize> =
        dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();

    let n = tickers.len();
    let mut open = vec![f64::NAN; dates.len() * n];
    let mut close = vec![f64::NAN; dates.len() * n];
    for ((date, i), (o, c, _)) in rows {
        let t = date_idx[&date];
        open[t * n + i] = o;
        close[t * n + i] = c;
    }
    PricePanel::new(dates, tickers, open, close)
}

/// Writes a panel as long-format CSV, rows sorted by (date, ticker).
///
/// Cells with neither price observed are omitted; half-observed cells keep
/// the observed side and leave the other field blank, so a load/write cycle
/// reproduces a writer-produced file byte for byte.
pub fn write_panel<P: AsRef<Path>>(panel: &PricePanel, path: P) -> Result<(), PanelError> {
    let mut out = BufWriter::new(File::create(path)?);
    dump_panel(panel, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Same as [`write_panel`] but to any writer.
pub fn dump_panel<W: Write>(panel: &PricePanel, out: &mut W) -> Result<(), PanelError> {
    writeln!(out, "{}", PANEL_HEADER.join(","))?;
    let mut order: Vec<usize> = (0..panel.n_securities()).collect();
    order.sort_by(|&a, &b| panel.tickers[a].cmp(&panel.tickers[b]));
    let fmt = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
    for t in 0..panel.n_days() {
        for &i in &order {
            let (o, c) = (panel.open(t, i), panel.close(t, i));
            if o.is_nan() && c.is_nan() {
                continue;
            }
            writeln!(
                out,
                "{},{},{},{}",
                panel.dates[t].format("%Y-%m-%d"),
                panel.tickers[i],
                fmt(o),
                fmt(c)
            )?;
        }
    }
    Ok(())
}

/// Parameters of the synthetic cluster market.
///
/// Securities are assigned round-robin to clusters. Each cluster's common
/// log price follows a random walk with step volatility `market_vol`; each
/// security adds an idiosyncratic spread following a discrete
/// mean-reverting process `s(t) = (1 - spread_reversion) * s(t-1) + spread_vol * z`,
/// so intra-cluster log spreads are stationary with lag-1 autocorrelation
/// `1 - spread_reversion`. Opens are the previous close perturbed by one
/// overnight step with a quarter of the daily market volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticMarketSpec {
    pub n_securities: usize,
    pub n_days: usize,
    pub n_clusters: usize,
    /// Fraction of the spread pulled back each day, in (0, 1].
    pub spread_reversion: f64,
    pub spread_vol: f64,
    pub market_vol: f64,
    pub seed: u64,
}

impl Default for SyntheticMarketSpec {
    fn default() -> Self {
        Self {
            n_securities: 60,
            n_days: 2000,
            n_clusters: 6,
            spread_reversion: 0.1,
            spread_vol: 0.01,
            market_vol: 0.005,
            seed: 42,
        }
    }
}

impl SyntheticMarketSpec {
    pub fn validate(&self) -> Result<(), PanelError> {
        let fail = |msg: String| Err(PanelError::InvalidSpec(msg));
        if self.n_securities == 0 || self.n_days == 0 {
            return fail("n_securities and n_days must be positive".into());
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_securities {
            return fail(format!(
                "n_clusters must be in 1..={}, got {}",
                self.n_securities, self.n_clusters
            ));
        }
        if !(self.spread_reversion > 0.0 && self.spread_reversion <= 1.0) {
            return fail(format!(
                "spread_reversion must be in (0, 1], got {}",
                self.spread_reversion
            ));
        }
        if !(self.spread_vol >= 0.0 && self.spread_vol.is_finite()) {
            return fail(format!("spread_vol must be >= 0, got {}", self.spread_vol));
        }
        if !(self.market_vol >= 0.0 && self.market_vol.is_finite()) {
            return fail(format!("market_vol must be >= 0, got {}", self.market_vol));
        }
        Ok(())
    }
}

fn next_weekday(mut d: NaiveDate) -> NaiveDate {
    loop {
        d = d.succ_opt().expect("date overflow");
        match d.weekday() {
            Weekday::Sat | Weekday::Sun => continue,
            _ => return d,
        }
    }
}

/// Generates a deterministic synthetic panel; same spec, same panel.
pub fn generate_synthetic(spec: &SyntheticMarketSpec) -> Result<PricePanel, PanelError> {
    spec.validate()?;
    let n = spec.n_securities;
    let k = spec.n_clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut dates = Vec::with_capacity(spec.n_days);
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    for _ in 0..spec.n_days {
        dates.push(d);
        d = next_weekday(d);
    }
    let tickers: Vec<String> = (0..n).map(|i| format!("S{i:03}")).collect();

    // Cluster base levels are staggered so clusters are distinguishable even
    // with zero volatility.
    let mut market: Vec<f64> = (0..k).map(|c| 100f64.ln() + 0.1 * c as f64).collect();
    let mut spread = vec![0.0f64; n];
    let keep = 1.0 - spec.spread_reversion;

    let mut open = vec![0.0f64; spec.n_days * n];
    let mut close = vec![0.0f64; spec.n_days * n];
    for i in 0..n {
        close[i] = (market[i % k] + spread[i]).exp();
        open[i] = close[i];
    }
    for t in 1..spec.n_days {
        for m in market.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *m += spec.market_vol * z;
        }
        for (i, s) in spread.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *s = keep * *s + spec.spread_vol * z;
            close[t * n + i] = (market[i % k] + *s).exp();
        }
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            open[t * n + i] = close[(t - 1) * n + i] * (0.25 * spec.market_vol * z).exp();
        }
    }
    PricePanel::new(dates, tickers, open, close)
}

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Timelike};
use serde::Serialize;

use super::{MarketError, Result};

/// Abort when more than this fraction of aligned bars had to be forward-filled.
pub const DEFAULT_MAX_FILL_FRACTION: f64 = 0.05;

const HEADER: [&str; 6] = ["timestamp", "symbol", "open", "high", "low", "close"];

/// `[open, high, low, close]`.
pub type Ohlc = [f64; 4];

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FillReport {
    /// Aligned minutes times symbols.
    pub total_bars: usize,
    pub filled_bars: usize,
    pub filled_by_symbol: BTreeMap<String, usize>,
    /// Minutes dropped because some symbol had not started trading yet.
    pub leading_minutes_dropped: usize,
}

impl FillReport {
    pub fn fraction(&self) -> f64 {
        if self.total_bars == 0 {
            0.0
        } else {
            self.filled_bars as f64 / self.total_bars as f64
        }
    }
}

/// Timestamp-aligned OHLC bars; `bars[s][t]` is symbol `s` at `timestamps[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub symbols: Vec<String>,
    /// Minutes since the Unix epoch, strictly increasing.
    pub timestamps: Vec<i64>,
    pub bars: Vec<Vec<Ohlc>>,
    pub fills: FillReport,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }
}

/// Parses `2019-10-01T00:05:00Z` or `2019-10-01T00:05Z` into epoch minutes.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let dt = DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|d| d.naive_utc())
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%MZ").ok())?;
    if dt.second() != 0 || dt.nanosecond() != 0 {
        return None;
    }
    Some(dt.and_utc().timestamp().div_euclid(60))
}

pub fn format_timestamp(minutes: i64) -> String {
    DateTime::from_timestamp(minutes * 60, 0)
        .expect("timestamp in range")
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

/// Reads a long-format price CSV from `path`; see [`parse_prices`].
pub fn load_prices(path: &Path, symbols: &[String], max_fill_fraction: f64) -> Result<PriceSeries> {
    let file = std::fs::File::open(path).map_err(|e| MarketError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_prices(file, symbols, max_fill_fraction)
}

/// Parses `timestamp,symbol,open,high,low,close` rows, keeps the requested
/// symbols (in the requested order) and aligns them on the union of their
/// timestamps. Gaps are forward-filled and counted; rows before every symbol
/// has a first bar are dropped.
pub fn parse_prices<R: Read>(reader: R, symbols: &[String], max_fill_fraction: f64) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| MarketError::BadHeader(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(MarketError::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }

    let mut per_symbol: Vec<BTreeMap<i64, Ohlc>> = vec![BTreeMap::new(); symbols.len()];
    let mut last_ts: Vec<Option<i64>> = vec![None; symbols.len()];
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2; // 1-based, header is row 1
        let rec = rec.map_err(|e| MarketError::BadRow {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != 6 {
            return Err(MarketError::BadRow {
                row,
                message: format!("expected 6 fields, got {}", rec.len()),
            });
        }
        let symbol = &rec[1];
        let Some(s) = symbols.iter().position(|x| x == symbol) else {
            continue;
        };
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| MarketError::BadRow {
            row,
            message: format!("bad timestamp {:?}", &rec[0]),
        })?;
        let mut bar = [0.0; 4];
        for (k, b) in bar.iter_mut().enumerate() {
            *b = rec[2 + k].parse::<f64>().map_err(|e| MarketError::BadRow {
                row,
                message: format!("{}: {e}", HEADER[2 + k]),
            })?;
        }
        if bar.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(MarketError::NonPositivePrice {
                row,
                symbol: symbol.to_string(),
            });
        }
        if last_ts[s].is_some_and(|prev| ts <= prev) {
            return Err(MarketError::NonMonotone {
                row,
                symbol: symbol.to_string(),
            });
        }
        last_ts[s] = Some(ts);
        per_symbol[s].insert(ts, bar);
    }
    for (s, m) in per_symbol.iter().enumerate() {
        if m.is_empty() {
            return Err(MarketError::MissingSymbol(symbols[s].clone()));
        }
    }

    let start = per_symbol
        .iter()
        .map(|m| *m.keys().next().expect("nonempty"))
        .max()
        .expect("at least one symbol");
    let mut grid: Vec<i64> = per_symbol.iter().flat_map(|m| m.keys().copied()).collect();
    grid.sort_unstable();
    grid.dedup();
    let leading = grid.iter().take_while(|&&t| t < start).count();
    let grid: Vec<i64> = grid.split_off(leading);

    let mut fills = FillReport {
        total_bars: grid.len() * symbols.len(),
        leading_minutes_dropped: leading,
        ..FillReport::default()
    };
    let mut bars = Vec::with_capacity(symbols.len());
    for (s, m) in per_symbol.iter().enumerate() {
        let mut out = Vec::with_capacity(grid.len());
        let mut last: Option<Ohlc> = m.range(..start).next_back().map(|(_, b)| *b);
        let mut filled = 0;
        for t in &grid {
            match m.get(t) {
                Some(b) => {
                    last = Some(*b);
                    out.push(*b);
                }
                None => {
                    filled += 1;
                    out.push(last.expect("every symbol has a bar at or before start"));
                }
            }
        }
        fills.filled_bars += filled;
        fills.filled_by_symbol.insert(symbols[s].clone(), filled);
        bars.push(out);
    }
    if fills.fraction() > max_fill_fraction {
        return Err(MarketError::TooManyFills {
            filled: fills.filled_bars,
            total: fills.total_bars,
            fraction: fills.fraction(),
            limit: max_fill_fraction,
        });
    }
    Ok(PriceSeries {
        symbols: symbols.to_vec(),
        timestamps: grid,
        bars,
        fills,
    })
}

/// Writes the long-format CSV. Prices use shortest round-trip formatting, so
/// reading the file back reproduces every value exactly.
pub fn write_prices<W: Write>(series: &PriceSeries, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (t, &ts) in series.timestamps.iter().enumerate() {
        let stamp = format_timestamp(ts);
        for (s, sym) in series.symbols.iter().enumerate() {
            let b = series.bars[s][t];
            w.write_record([
                stamp.clone(),
                sym.clone(),
                b[0].to_string(),
                b[1].to_string(),
                b[2].to_string(),
                b[3].to_string(),
            ])?;
        }
    }
    w.flush()
}

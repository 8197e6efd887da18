use std::sync::Arc;

use crate::tensor::DenseTensor;

use super::{MarketError, PriceSeries, Result, CLOSE, FEATURES};

/// Per-symbol OHLC log-returns; `rows[s][t]` is the return over
/// `(timestamps[t] - 1 bar, timestamps[t]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable {
    pub symbols: Vec<String>,
    pub timestamps: Vec<i64>,
    /// `rows[symbol][t]`.
    pub rows: Vec<Vec<[f64; FEATURES]>>,
    /// Timestamp of the price row preceding the first return.
    pub origin: i64,
}

impl ReturnTable {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// The same table with symbols in `order`.
    pub fn select(&self, order: &[String]) -> Result<ReturnTable> {
        let mut rows = Vec::with_capacity(order.len());
        for sym in order {
            let s = self
                .symbols
                .iter()
                .position(|x| x == sym)
                .ok_or_else(|| MarketError::MissingSymbol(sym.clone()))?;
            rows.push(self.rows[s].clone());
        }
        Ok(ReturnTable {
            symbols: order.to_vec(),
            timestamps: self.timestamps.clone(),
            rows,
            origin: self.origin,
        })
    }
}

/// `ln p_t - ln p_{t-1}` per feature and symbol; one row shorter than the input.
pub fn log_returns(series: &PriceSeries) -> Result<ReturnTable> {
    if series.len() < 2 {
        return Err(MarketError::InsufficientHistory {
            have: series.len(),
            needed: 2,
        });
    }
    let rows = series
        .bars
        .iter()
        .map(|bars| {
            bars.windows(2)
                .map(|w| std::array::from_fn(|f| w[1][f].ln() - w[0][f].ln()))
                .collect()
        })
        .collect();
    Ok(ReturnTable {
        symbols: series.symbols.clone(),
        timestamps: series.timestamps[1..].to_vec(),
        rows,
        origin: series.timestamps[0],
    })
}

/// One state tensor and the target return it is scored against.
#[derive(Debug, Clone)]
pub struct StreamSample {
    /// `(FEATURES, lags, symbols)`, lag axis oldest to newest.
    pub state: Arc<DenseTensor>,
    /// Target close return over the minute after the window.
    pub next_return: f64,
    /// Timestamp of the newest return in the window.
    pub state_time: i64,
    /// Timestamp at which `next_return` is realized.
    pub reward_time: i64,
}

/// Sliding windows over a return table. Sample `i` covers return rows
/// `i..i + lags` and is scored with row `i + lags`, so there are
/// `rows - lags` samples. `final_state` is the window over the last `lags`
/// rows; it has no realized successor and only serves as the terminal `s'`.
#[derive(Debug, Clone)]
pub struct ReturnTensorStream {
    pub symbols: Vec<String>,
    pub target: String,
    pub lags: usize,
    pub samples: Vec<StreamSample>,
    pub final_state: Arc<DenseTensor>,
    pub final_time: i64,
    /// Timestamp of the first price row the returns were built from.
    pub origin: i64,
}

impl ReturnTensorStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn target_index(&self) -> usize {
        self.symbols
            .iter()
            .position(|s| *s == self.target)
            .expect("validated at build")
    }

    /// State observed after acting on sample `i`.
    pub fn successor(&self, i: usize) -> &Arc<DenseTensor> {
        self.samples.get(i + 1).map_or(&self.final_state, |s| &s.state)
    }
}

fn window(returns: &ReturnTable, end: usize, lags: usize) -> DenseTensor {
    let n = returns.symbols.len();
    let first = end + 1 - lags;
    DenseTensor::from_fn(&[FEATURES, lags, n], |ix| returns.rows[ix[2]][first + ix[1]][ix[0]])
}

pub fn build_stream(returns: &ReturnTable, lags: usize, target: &str) -> Result<ReturnTensorStream> {
    let t = returns.len();
    if lags == 0 || t < lags + 1 {
        return Err(MarketError::InsufficientHistory {
            have: t,
            needed: lags.max(1) + 1,
        });
    }
    let c = returns
        .symbols
        .iter()
        .position(|s| s == target)
        .ok_or_else(|| MarketError::UnknownTarget(target.to_string()))?;
    for (s, rows) in returns.rows.iter().enumerate() {
        if let Some(row) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(MarketError::NonFiniteReturn {
                symbol: returns.symbols[s].clone(),
                row,
            });
        }
    }
    let samples = (lags - 1..t - 1)
        .map(|k| StreamSample {
            state: Arc::new(window(returns, k, lags)),
            next_return: returns.rows[c][k + 1][CLOSE],
            state_time: returns.timestamps[k],
            reward_time: returns.timestamps[k + 1],
        })
        .collect();
    Ok(ReturnTensorStream {
        symbols: returns.symbols.clone(),
        target: target.to_string(),
        lags,
        samples,
        final_state: Arc::new(window(returns, t - 1, lags)),
        final_time: returns.timestamps[t - 1],
        origin: returns.origin,
    })
}

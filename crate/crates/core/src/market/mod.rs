//! FOREX data ingestion, log-return windows and the trading environment.

mod env;
mod prices;
mod stream;
mod synth;

use thiserror::Error;

pub use env::{split, split_boundary, TradingEnv};
pub use prices::{
    format_timestamp, load_prices, parse_prices, parse_timestamp, write_prices, FillReport, Ohlc, PriceSeries,
    DEFAULT_MAX_FILL_FRACTION,
};
pub use stream::{build_stream, log_returns, ReturnTable, ReturnTensorStream, StreamSample};
pub use synth::{default_currencies, default_symbols, synth_series, SynthKind, SynthSpec};

/// Open, high, low, close.
pub const FEATURES: usize = 4;
/// Index of the close price inside a bar.
pub const CLOSE: usize = 3;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("header must be exactly `timestamp,symbol,open,high,low,close`, got `{0}`")]
    BadHeader(String),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("row {row}: nonpositive price for {symbol}")]
    NonPositivePrice { row: usize, symbol: String },
    #[error("row {row}: timestamp for {symbol} does not increase")]
    NonMonotone { row: usize, symbol: String },
    #[error("symbol {0} has no rows")]
    MissingSymbol(String),
    #[error("{filled} of {total} bars forward-filled ({fraction:.4}), above the limit {limit}")]
    TooManyFills {
        filled: usize,
        total: usize,
        fraction: f64,
        limit: f64,
    },
    #[error("need at least {needed} rows, have {have}")]
    InsufficientHistory { have: usize, needed: usize },
    #[error("non-finite return for {symbol} at row {row}")]
    NonFiniteReturn { symbol: String, row: usize },
    #[error("target symbol {0} is not in the series")]
    UnknownTarget(String),
    #[error("step called on a finished episode")]
    StepOnTerminal,
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("split leaves {train} train and {test} test samples; each side needs {needed}")]
    DegenerateSplit { train: usize, test: usize, needed: usize },
    #[error("invalid synthetic series: {0}")]
    InvalidSynth(String),
}

pub type Result<T> = std::result::Result<T, MarketError>;

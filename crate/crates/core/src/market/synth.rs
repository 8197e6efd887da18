use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{parse_timestamp, FillReport, MarketError, PriceSeries, Result};

const SYMBOLS: [&str; 9] = [
    "EURUSD", "GBPUSD", "AUDUSD", "NZDUSD", "USDCAD", "USDCHF", "USDJPY", "USDSEK", "USDNOK",
];
const CURRENCIES: [&str; 9] = ["EUR", "GBP", "AUD", "NZD", "CAD", "CHF", "JPY", "SEK", "NOK"];
const BASE_PRICES: [f64; 9] = [1.1, 1.25, 0.68, 0.63, 1.32, 0.99, 108.0, 9.8, 9.1];
const MOMENTUM_PERSISTENCE: f64 = 0.9;

/// The nine pair codes, each quoting one non-USD currency against USD.
pub fn default_symbols() -> Vec<String> {
    SYMBOLS.iter().map(|s| s.to_string()).collect()
}

/// Non-USD leg of each entry of [`default_symbols`], in the same order.
pub fn default_currencies() -> Vec<String> {
    CURRENCIES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Up, down, up, ... starting with up.
    Alternating,
    /// The next move repeats the current sign with probability 0.9.
    Momentum,
    /// Independent fair signs.
    RandomWalk,
}

impl std::str::FromStr for SynthKind {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternating" => Ok(Self::Alternating),
            "momentum" => Ok(Self::Momentum),
            "random-walk" => Ok(Self::RandomWalk),
            other => Err(MarketError::InvalidSynth(format!("unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    /// Number of minutes (price rows).
    pub length: usize,
    pub seed: u64,
    /// Per-slot close noise and high/low widening, in units of `magnitude`.
    #[serde(default)]
    pub noise: f64,
    /// Absolute log-return of every common move.
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    #[serde(default = "default_start")]
    pub start: String,
    /// Defaults to [`default_symbols`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<Vec<String>>,
}

fn default_magnitude() -> f64 {
    0.001
}

fn default_start() -> String {
    "2019-10-01T00:00:00Z".to_string()
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::RandomWalk,
            length: 1000,
            seed: 0,
            noise: 0.0,
            magnitude: default_magnitude(),
            start: default_start(),
            symbols: None,
        }
    }
}

impl SynthSpec {
    pub fn symbols(&self) -> Vec<String> {
        self.symbols.clone().unwrap_or_else(default_symbols)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MarketError::InvalidSynth(m));
        if self.length < 2 {
            return bad(format!("length must be at least 2, got {}", self.length));
        }
        if !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return bad(format!("magnitude must be positive, got {}", self.magnitude));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be nonnegative, got {}", self.noise));
        }
        if parse_timestamp(&self.start).is_none() {
            return bad(format!("bad start timestamp {:?}", self.start));
        }
        if self.symbols.as_ref().is_some_and(|s| s.is_empty()) {
            return bad("symbols must not be empty".to_string());
        }
        Ok(())
    }
}

/// Common sign path shared by every slot; `signs[t]` drives the move into row `t + 1`.
fn signs(kind: SynthKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fair = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    match kind {
        SynthKind::Alternating => (0..n).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        SynthKind::RandomWalk => (0..n).map(|_| fair(rng)).collect(),
        SynthKind::Momentum => {
            let mut out = Vec::with_capacity(n);
            let mut s = fair(rng);
            for _ in 0..n {
                out.push(s);
                if !rng.random_bool(MOMENTUM_PERSISTENCE) {
                    s = -s;
                }
            }
            out
        }
    }
}

/// Deterministic OHLC minutes. Every slot follows the common sign path with
/// its own independent close noise; opens equal the previous close, so with
/// `noise == 0` every OHLC return of every slot is exactly `±magnitude` up to
/// rounding in `exp`/`ln`.
pub fn synth_series(spec: &SynthSpec) -> Result<PriceSeries> {
    spec.validate()?;
    let symbols = spec.symbols();
    let start = parse_timestamp(&spec.start).expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let moves = signs(spec.kind, spec.length - 1, &mut rng);
    let scale = spec.noise * spec.magnitude;
    let mut bars = Vec::with_capacity(symbols.len());
    for s in 0..symbols.len() {
        let mut logp = BASE_PRICES[s % BASE_PRICES.len()].ln();
        let mut close = logp.exp();
        let mut out = Vec::with_capacity(spec.length);
        out.push([close; 4]);
        for &m in &moves {
            let z: f64 = rng.sample(StandardNormal);
            logp += m * spec.magnitude + scale * z;
            let open = close;
            close = logp.exp();
            let (up, down): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let high = open.max(close) * (scale * up.abs()).exp();
            let low = open.min(close) * (-scale * down.abs()).exp();
            out.push([open, high, low, close]);
        }
        bars.push(out);
    }
    Ok(PriceSeries {
        timestamps: (0..spec.length as i64).map(|t| start + t).collect(),
        fills: FillReport {
            total_bars: spec.length * symbols.len(),
            filled_by_symbol: symbols.iter().map(|s| (s.clone(), 0)).collect(),
            ..FillReport::default()
        },
        symbols,
        bars,
    })
}

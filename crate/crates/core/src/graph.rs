//! Graph adjacencies and graph filters.
//!
//! Two filter forms are supported: the order-2 shift filter `I + A`, and the
//! order-4 multi-linear filter obtained by folding `I + (A ⊗ P)` into shape
//! `(J, I, J, I)`, where `P` propagates features between neighbouring vertices.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{self, DenseTensor, TensorError};

/// Largest `J * I` accepted by [`multilinear_filter`] by default.
pub const DEFAULT_FILTER_CAP: usize = 2048;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("adjacency must be square, got shape {0:?}")]
    NotSquare(Vec<usize>),
    #[error("adjacency entry ({row}, {col}) = {value} is negative")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("adjacency has a self-loop at node {0}")]
    SelfLoop(usize),
    #[error("node {0} has zero degree and cannot be normalized")]
    IsolatedNode(usize),
    #[error("propagation matrix must be square, got shape {0:?}")]
    PropagationNotSquare(Vec<usize>),
    #[error("multi-linear filter size J*I = {size} exceeds cap {cap}")]
    FilterTooLarge { size: usize, cap: usize },
    #[error("time graph needs at least one step")]
    EmptyTimeGraph,
    #[error("rate for {pair} must be positive (spot {spot}, forward {forward})")]
    NonPositiveRate { pair: String, spot: f64, forward: f64 },
    #[error("pair {pair}: unknown currency {currency}")]
    UnknownCurrency { pair: String, currency: String },
    #[error("pair symbol {0:?} is not a 6-letter code")]
    BadPairSymbol(String),
    #[error("currencies {0} and {1} are quoted more than once")]
    DuplicatePair(String, String),
    #[error("carry table parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Weighted adjacency with non-negative entries and an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    weights: DenseTensor,
}

impl Adjacency {
    pub fn new(weights: DenseTensor) -> Result<Self> {
        let s = weights.shape();
        if s.len() != 2 || s[0] != s[1] {
            return Err(GraphError::NotSquare(s.to_vec()));
        }
        let n = s[0];
        for col in 0..n {
            for row in 0..n {
                let value = weights.get(&[row, col]);
                if value < 0.0 {
                    return Err(GraphError::Negative { row, col, value });
                }
                if row == col && value != 0.0 {
                    return Err(GraphError::SelfLoop(row));
                }
            }
        }
        Ok(Self { weights })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            weights: DenseTensor::zeros(&[n, n]),
        }
    }

    pub fn nodes(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn weights(&self) -> &DenseTensor {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights.get(&[row, col])
    }

    pub fn degrees(&self) -> Vec<f64> {
        let n = self.nodes();
        (0..n).map(|r| (0..n).map(|c| self.weight(r, c)).sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.nodes();
        (0..n).all(|r| (0..n).all(|c| self.weight(r, c) == self.weight(c, r)))
    }

    /// Nonzero entries as `(row, col, weight)`, column-major.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.nodes();
        let mut out = Vec::new();
        for c in 0..n {
            for r in 0..n {
                let w = self.weight(r, c);
                if w != 0.0 {
                    out.push((r, c, w));
                }
            }
        }
        out
    }

    /// `D^{-1/2} A D^{-1/2}` with `D` the diagonal of row sums.
    pub fn normalize(&self) -> Result<Adjacency> {
        let deg = self.degrees();
        if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
            return Err(GraphError::IsolatedNode(i));
        }
        let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
        let n = self.nodes();
        let w = DenseTensor::from_fn(&[n, n], |i| {
            // the scale product commutes, so the result stays exactly symmetric
            (inv_sqrt[i[0]] * inv_sqrt[i[1]]) * self.weight(i[0], i[1])
        });
        Ok(Adjacency { weights: w })
    }

    /// `I + A`.
    pub fn shift_matrix(&self) -> DenseTensor {
        let n = self.nodes();
        DenseTensor::identity(n)
            .axpy(1.0, &self.weights)
            .expect("square adjacency")
    }
}

/// Free-function form of [`Adjacency::normalize`].
pub fn normalize(a: &Adjacency) -> Result<Adjacency> {
    a.normalize()
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphFilter {
    /// `I + A`, shape `(I, I)`.
    Shift(DenseTensor),
    /// Folded `I + (A ⊗ P)`, shape `(J, I, J, I)`.
    MultiLinear(DenseTensor),
}

impl GraphFilter {
    /// Filter as a square matrix: `I + A` or the `(JI x JI)` unfolding.
    pub fn matrix(&self) -> DenseTensor {
        match self {
            GraphFilter::Shift(m) => m.clone(),
            GraphFilter::MultiLinear(t) => tensor::matricize_grouped(t, 2).expect("order-4 filter"),
        }
    }

    pub fn tensor(&self) -> &DenseTensor {
        match self {
            GraphFilter::Shift(m) | GraphFilter::MultiLinear(m) => m,
        }
    }

    /// Number of graph vertices the filter acts on.
    pub fn nodes(&self) -> usize {
        match self {
            GraphFilter::Shift(m) => m.shape()[0],
            GraphFilter::MultiLinear(t) => t.shape()[1],
        }
    }

    /// Applies the filter to a node signal.
    ///
    /// A shift filter takes an `(I, M)` signal and returns `(I + A) F`. A
    /// multi-linear filter takes a `(J, I)` signal and contracts it over the
    /// filter's trailing mode pair.
    pub fn apply(&self, signal: &DenseTensor) -> Result<DenseTensor> {
        Ok(match self {
            GraphFilter::Shift(m) => tensor::matmul(m, signal)?,
            GraphFilter::MultiLinear(t) => tensor::contract(t, &[2, 3], signal, &[0, 1])?,
        })
    }
}

pub fn shift_filter(a: &Adjacency) -> GraphFilter {
    GraphFilter::Shift(a.shift_matrix())
}

/// Folds `I + (A ⊗ P)` into the `(J, I, J, I)` multi-linear filter.
///
/// `cap` bounds `J * I`; the folded filter holds `(J I)^2` entries.
pub fn multilinear_filter(a: &Adjacency, p: &DenseTensor, cap: usize) -> Result<GraphFilter> {
    let ps = p.shape();
    if ps.len() != 2 || ps[0] != ps[1] {
        return Err(GraphError::PropagationNotSquare(ps.to_vec()));
    }
    let (j, i) = (ps[0], a.nodes());
    let size = j * i;
    if size > cap {
        return Err(GraphError::FilterTooLarge { size, cap });
    }
    let coupled = tensor::kron(a.weights(), p)?;
    let full = DenseTensor::identity(size).axpy(1.0, &coupled)?;
    Ok(GraphFilter::MultiLinear(tensor::tensorize_grouped(
        &full,
        &[j, i, j, i],
        2,
    )?))
}

/// Directed past-to-present path over `t` time steps: `a[k, k-1] = 1`.
pub fn time_graph(t: usize) -> Result<Adjacency> {
    if t == 0 {
        return Err(GraphError::EmptyTimeGraph);
    }
    let mut w = DenseTensor::zeros(&[t, t]);
    for k in 1..t {
        w.set(&[k, k - 1], 1.0);
    }
    Ok(Adjacency { weights: w })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuote {
    pub spot: f64,
    pub forward: f64,
}

impl RateQuote {
    /// `1 - forward / spot`.
    pub fn carry(&self) -> f64 {
        1.0 - self.forward / self.spot
    }
}

/// Spot and forward quotes keyed by 6-letter pair symbol (`"EURUSD"`).
///
/// On disk this is a TOML document with one table per pair:
///
/// ```toml
/// [EURGBP]
/// spot = 0.8612
/// forward = 0.8630
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CarryTable {
    pub pairs: BTreeMap<String, RateQuote>,
}

impl CarryTable {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GraphError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain float tables serialize")
    }

    /// Currencies in order of first appearance across the (sorted) pair keys.
    pub fn currencies(&self) -> Result<Vec<String>> {
        let mut out: Vec<String> = Vec::new();
        for pair in self.pairs.keys() {
            let (base, quote) = split_pair(pair)?;
            for c in [base, quote] {
                if !out.iter().any(|o| o == c) {
                    out.push(c.to_string());
                }
            }
        }
        Ok(out)
    }
}

fn split_pair(pair: &str) -> Result<(&str, &str)> {
    if pair.len() != 6 || !pair.is_ascii() {
        return Err(GraphError::BadPairSymbol(pair.to_string()));
    }
    Ok((&pair[..3], &pair[3..]))
}

/// Carry graph over `currencies`: `a[i, j] = |1 - r_f / r_s|` for every quoted
/// pair, zero elsewhere. With `rescale` the weights are divided by their
/// maximum so the strongest edge has weight one.
pub fn carry_graph(table: &CarryTable, currencies: &[String], rescale: bool) -> Result<Adjacency> {
    let n = currencies.len();
    let pos = |pair: &str, c: &str| {
        currencies
            .iter()
            .position(|x| x == c)
            .ok_or_else(|| GraphError::UnknownCurrency {
                pair: pair.to_string(),
                currency: c.to_string(),
            })
    };
    let mut w = DenseTensor::zeros(&[n, n]);
    let mut seen = vec![false; n * n];
    for (pair, quote) in &table.pairs {
        let (base, quote_ccy) = split_pair(pair)?;
        if !(quote.spot > 0.0 && quote.forward > 0.0) {
            return Err(GraphError::NonPositiveRate {
                pair: pair.clone(),
                spot: quote.spot,
                forward: quote.forward,
            });
        }
        let (i, j) = (pos(pair, base)?, pos(pair, quote_ccy)?);
        if i == j || seen[i + n * j] {
            return Err(GraphError::DuplicatePair(base.into(), quote_ccy.into()));
        }
        seen[i + n * j] = true;
        seen[j + n * i] = true;
        let weight = quote.carry().abs();
        w.set(&[i, j], weight);
        w.set(&[j, i], weight);
    }
    if rescale {
        let max = w.data().iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            w = w.scale(1.0 / max);
        }
    }
    Adjacency::new(w)
}

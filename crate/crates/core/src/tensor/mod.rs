//! Dense N-mode tensors and the multilinear algebra used by the network layers.
//!
//! Every tensor is stored flat in Little-Endian order: the first index varies
//! fastest. All conversions between multi-indices and flat offsets go through
//! [`index`], nowhere else.
//!
//! Mode indices in this API are 0-based.

pub mod index;
mod ops;
mod tt;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use ops::{
    contract, kron, matmul, matricize, matricize_grouped, mode_product, permute, tensorize, tensorize_grouped,
};
pub use tt::{tt_matvec, tt_reconstruct, tt_svd, TTMatrix, TTTensor, Truncation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("data length {actual} does not match shape {shape:?} (expected {expected})")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value at flat offset {0}")]
    NonFinite(usize),
    #[error("zero-sized mode in shape {0:?}")]
    ZeroMode(Vec<usize>),
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("mode {0} listed more than once")]
    DuplicateMode(usize),
    #[error("contracted mode lists have different lengths ({0} vs {1})")]
    ModeListLength(usize, usize),
    #[error("paired modes differ in size: left mode {left_mode} has {left}, right mode {right_mode} has {right}")]
    PairedSize {
        left_mode: usize,
        right_mode: usize,
        left: usize,
        right: usize,
    },
    #[error("order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },
    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("invalid TT ranks: {0}")]
    InvalidRanks(String),
    #[error("relative tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("tensor is empty")]
    Empty,
    #[error("malformed tensor dump: {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Real N-mode array with Little-Endian linearization.
///
/// Order 0 is a scalar holding exactly one value. Constructors reject NaN and
/// infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroMode(shape));
        }
        let expected = index::numel(&shape);
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(pos));
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for results of finite arithmetic on valid tensors.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(index::numel(&shape), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_parts(shape.to_vec(), vec![0.0; index::numel(shape)])
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(Vec::new(), vec![value])
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i + n * i] = 1.0;
        }
        t
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let n = index::numel(shape);
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0; shape.len()];
        for lin in 0..n {
            index::unravel_into(shape, lin, &mut idx);
            data.push(f(&idx));
        }
        Self::from_parts(shape.to_vec(), data)
    }

    /// Matrix from row-major nested rows; stored Little-Endian like any tensor.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(TensorError::Parse("ragged rows".into()));
        }
        let mut data = vec![0.0; r * c];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[i + r * j] = v;
            }
        }
        Self::new(vec![r, c], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable view of the flat storage. Callers keep values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[index::ravel(&self.shape, idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = index::ravel(&self.shape, idx);
        self.data[off] = value;
    }

    /// Reinterprets the flat data under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroMode(shape.to_vec()));
        }
        if index::numel(shape) != self.data.len() {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape.clone(),
                actual: shape.to_vec(),
            });
        }
        Ok(Self::from_parts(shape.to_vec(), self.data.clone()))
    }

    pub fn into_reshaped(self, shape: &[usize]) -> Result<Self> {
        if index::numel(shape) != self.data.len() || shape.contains(&0) {
            return Err(TensorError::ShapeMismatch {
                expected: self.shape,
                actual: shape.to_vec(),
            });
        }
        Ok(Self::from_parts(shape.to_vec(), self.data))
    }

    /// Transpose of an order-2 tensor.
    pub fn transpose(&self) -> Result<Self> {
        if self.order() != 2 {
            return Err(TensorError::OrderMismatch(self.order(), 2));
        }
        permute(self, &[1, 0])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|v| alpha * v).collect())
    }

    /// `self + alpha * other`, shapes must agree.
    pub fn axpy(&self, alpha: f64, other: &DenseTensor) -> Result<Self> {
        self.expect_shape(other.shape())?;
        Ok(Self::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect(),
        ))
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.expect_shape(other.shape())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(TensorError::ShapeMismatch {
                expected: shape.to_vec(),
                actual: self.shape.clone(),
            });
        }
        Ok(())
    }
}

/// Debug text dump: a `shape:` header line followed by the flat values, one
/// per line, in storage order. Floats are written in shortest round-trip form.
impl fmt::Display for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        writeln!(f, "shape: {}", dims.join(" "))?;
        for v in &self.data {
            writeln!(f, "{v:?}")?;
        }
        Ok(())
    }
}

impl FromStr for DenseTensor {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .and_then(|l| l.trim().strip_prefix("shape:"))
            .ok_or_else(|| TensorError::Parse("missing `shape:` header".into()))?;
        let shape = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| TensorError::Parse(e.to_string()))?;
        let data = lines
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| TensorError::Parse(e.to_string()))?;
        Self::new(shape, data)
    }
}

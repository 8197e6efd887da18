//! Multi-graph tensor network (MGTN) learning engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense tensors, contractions, Kronecker products and
//!   tensor-train (TT) decompositions.
//! - [`graph`]: adjacency construction (carry graph, time graph) and graph
//!   filters, including the order-4 multi-linear filter `tensorize(I + A ⊗ P)`.
//! - [`mgtn`]: the general and fast multi-graph tensor network layers, the TT
//!   dense layer and the three-layer Q-network with hand-derived gradients.
//! - [`rl`]: replay buffer, Adam, Bellman targets and the double deep-Q loop.
//! - [`market`]: OHLC ingestion, log-returns, window tensors and the trading
//!   environment.
//! - [`metrics`]: total return, Sharpe, Sortino, max drawdown, hit rate.
//! - [`cli`]: run configuration and the `train`/`backtest`/`synth`/`inspect`
//!   commands.

pub mod cli;
pub mod graph;
pub mod market;
pub mod metrics;
pub mod mgtn;
pub mod rl;
pub mod tensor;

mod error;

pub use error::{Error, Result};
pub use tensor::DenseTensor;

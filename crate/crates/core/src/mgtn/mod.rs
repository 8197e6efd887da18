//! Multi-graph tensor network layers and the Q-network built from them.

mod agent;
mod checkpoint;
pub mod gradcheck;
mod layers;

use thiserror::Error;

use crate::graph::GraphError;
use crate::tensor::TensorError;

pub use agent::{AgentNetwork, AgentSpec, ForwardCache, GradientSet, ACTIONS};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{Activation, FMGTNCache, FMGTNLayer, GMGTNCache, GMGTNGradients, GMGTNLayer};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidSpec(String),
    #[error("{what}: expected shape {expected:?}, got {actual:?}")]
    Shape {
        what: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("forward cache does not belong to this network")]
    CacheMismatch,
    #[error("unknown parameter array {0:?}")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Free-function forms of the layer and network passes.
pub fn gmgtn_forward(layer: &GMGTNLayer, x: &crate::DenseTensor) -> Result<crate::DenseTensor> {
    layer.forward(x)
}

pub fn fmgtn_forward(layer: &FMGTNLayer, x: &crate::DenseTensor) -> Result<crate::DenseTensor> {
    layer.forward(x)
}

pub fn agent_forward(net: &AgentNetwork, x: &crate::DenseTensor) -> Result<[f64; ACTIONS]> {
    net.forward(x)
}

pub fn agent_backward(net: &AgentNetwork, cache: &ForwardCache, dq: [f64; ACTIONS]) -> Result<GradientSet> {
    net.backward(cache, dq)
}

pub fn param_count(net: &AgentNetwork) -> usize {
    net.param_count()
}

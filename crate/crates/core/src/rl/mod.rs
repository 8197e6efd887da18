//! Double deep Q-learning: experience replay, Adam, Bellman targets and the
//! episode loop.

mod adam;
mod dqn;
mod replay;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mgtn::ModelError;
use crate::tensor::DenseTensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dqn::{
    bellman_targets, greedy_action, select_action, train_step, EpisodeReport, EpsilonSchedule, StepRecord, TargetMode,
    TargetUpdate, TrainConfig, Trainer,
};
pub use replay::ReplayBuffer;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay buffer holds {have} transitions, batch needs {need}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("optimizer state does not match parameter {0}")]
    OptimizerShape(String),
    #[error("environment: {0}")]
    Environment(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, AgentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Buy = 0,
    Sell = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Buy
        } else {
            Action::Sell
        }
    }

    /// +1 for a long bet, -1 for a short one.
    pub fn direction(self) -> f64 {
        match self {
            Action::Buy => 1.0,
            Action::Sell => -1.0,
        }
    }
}

/// One `(s, a, r, s', terminal)` tuple. States are shared, not copied.
#[derive(Debug, Clone)]
pub struct Experience {
    pub state: Arc<DenseTensor>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Arc<DenseTensor>,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub reward: f64,
    pub next_state: Arc<DenseTensor>,
    pub terminal: bool,
}

/// Anything the agent can act in.
pub trait Environment {
    fn reset(&mut self) -> Arc<DenseTensor>;
    fn step(&mut self, action: Action) -> Result<Transition>;
}

use std::sync::Arc;

use crate::rl::{Action, AgentError, Environment, Transition};
use crate::tensor::DenseTensor;

use super::{MarketError, Result, ReturnTensorStream};

/// Replays samples `start..end` of a stream. Every step is an independent
/// one-minute bet on the target pair: no inventory, no costs.
#[derive(Debug, Clone)]
pub struct TradingEnv {
    stream: Arc<ReturnTensorStream>,
    start: usize,
    end: usize,
    cursor: usize,
    done: bool,
}

impl TradingEnv {
    /// Environment over the whole stream.
    pub fn new(stream: Arc<ReturnTensorStream>) -> Self {
        let end = stream.len();
        Self::with_bounds(stream, 0, end)
    }

    /// # Panics
    /// If `start..end` is empty or exceeds the stream.
    pub fn with_bounds(stream: Arc<ReturnTensorStream>, start: usize, end: usize) -> Self {
        assert!(start < end && end <= stream.len(), "bad episode bounds {start}..{end}");
        Self {
            stream,
            start,
            end,
            cursor: start,
            done: false,
        }
    }

    pub fn stream(&self) -> &Arc<ReturnTensorStream> {
        &self.stream
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Timestamp of the newest return in the first and last states.
    pub fn state_times(&self) -> (i64, i64) {
        let s = &self.stream.samples;
        (s[self.start].state_time, s[self.end - 1].state_time)
    }

    /// Timestamps at which the first and last rewards are realized.
    pub fn reward_times(&self) -> (i64, i64) {
        let s = &self.stream.samples;
        (s[self.start].reward_time, s[self.end - 1].reward_time)
    }

    pub fn restart(&mut self) -> Arc<DenseTensor> {
        self.cursor = self.start;
        self.done = false;
        self.stream.samples[self.start].state.clone()
    }

    /// Reward is `direction(action) * r_{t+1}` for the target close.
    pub fn advance(&mut self, action: Action) -> Result<Transition> {
        if self.done {
            return Err(MarketError::StepOnTerminal);
        }
        let i = self.cursor;
        let reward = action.direction() * self.stream.samples[i].next_return;
        let next_state = self.stream.successor(i).clone();
        self.cursor += 1;
        self.done = self.cursor == self.end;
        Ok(Transition {
            reward,
            next_state,
            terminal: self.done,
        })
    }
}

impl Environment for TradingEnv {
    fn reset(&mut self) -> Arc<DenseTensor> {
        self.restart()
    }

    fn step(&mut self, action: Action) -> std::result::Result<Transition, AgentError> {
        self.advance(action).map_err(|e| AgentError::Environment(e.to_string()))
    }
}

/// Chronological split. The boundary is
/// `origin + floor((last - origin) * train_fraction)` in minutes, where
/// `origin` and `last` are the first and last price timestamps. Samples whose
/// reward is realized at or before the boundary train; the rest, including
/// every window straddling the boundary, test.
pub fn split(stream: Arc<ReturnTensorStream>, train_fraction: f64) -> Result<(TradingEnv, TradingEnv)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MarketError::InvalidFraction(train_fraction));
    }
    let boundary = split_boundary(&stream, train_fraction);
    let n_train = stream.samples.partition_point(|s| s.reward_time <= boundary);
    let n_test = stream.len() - n_train;
    if n_train < stream.lags || n_test < stream.lags {
        return Err(MarketError::DegenerateSplit {
            train: n_train,
            test: n_test,
            needed: stream.lags,
        });
    }
    let n = stream.len();
    Ok((
        TradingEnv::with_bounds(stream.clone(), 0, n_train),
        TradingEnv::with_bounds(stream, n_train, n),
    ))
}

/// Last minute that belongs to the training period.
pub fn split_boundary(stream: &ReturnTensorStream, train_fraction: f64) -> i64 {
    let span = stream.final_time - stream.origin;
    stream.origin + (span as f64 * train_fraction).floor() as i64
}

//! Deterministic configuration stream.
//!
//! Configurations are identified by consecutive ids; the loss curve of id `i`
//! is derived by the benchmark from `(seed, i)`. The stream state is therefore
//! just the seed and the next id, which makes it trivial to persist and to
//! continue after a reload.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::ConfigId;

/// Name recorded in run-state documents for this stream.
pub const STREAM_ALGORITHM: &str = "chacha8-per-config";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub algorithm_name: String,
    pub seed: u64,
    /// Id the stream hands out next.
    pub position: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("benchmark has only {capacity} configurations")]
    Exhausted { capacity: u64 },
    #[error("unknown sampler algorithm {0:?}")]
    UnknownAlgorithm(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigStream {
    seed: u64,
    position: u64,
    capacity: Option<u64>,
    replay: VecDeque<ConfigId>,
}

impl ConfigStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            position: 0,
            capacity: None,
            replay: VecDeque::new(),
        }
    }

    /// Continues a persisted stream.
    pub fn from_state(state: &RngState) -> Result<Self, SampleError> {
        if state.algorithm_name != STREAM_ALGORITHM {
            return Err(SampleError::UnknownAlgorithm(state.algorithm_name.clone()));
        }
        Ok(Self {
            seed: state.seed,
            position: state.position,
            capacity: None,
            replay: VecDeque::new(),
        })
    }

    /// Limits the stream to ids below `capacity`.
    pub fn with_capacity(mut self, capacity: Option<u64>) -> Self {
        self.capacity = capacity;
        self
    }

    /// Hands out `ids` first, then continues with new ids. Replayed ids do not
    /// advance the position.
    pub fn with_replay(mut self, ids: impl IntoIterator<Item = ConfigId>) -> Self {
        self.replay.extend(ids);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_config(&mut self) -> Result<ConfigId, SampleError> {
        if let Some(c) = self.replay.pop_front() {
            return Ok(c);
        }
        if let Some(cap) = self.capacity {
            if self.position >= cap {
                return Err(SampleError::Exhausted { capacity: cap });
            }
        }
        let c = ConfigId(self.position);
        self.position += 1;
        Ok(c)
    }

    pub fn take(&mut self, count: usize) -> Result<Vec<ConfigId>, SampleError> {
        (0..count).map(|_| self.next_config()).collect()
    }

    pub fn state(&self) -> RngState {
        RngState {
            algorithm_name: STREAM_ALGORITHM.to_string(),
            seed: self.seed,
            position: self.position,
        }
    }
}

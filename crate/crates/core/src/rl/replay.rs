use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AgentError, Experience, Result};

/// Fixed-capacity ring of experiences with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Experience>,
    next: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(AgentError::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, e: Experience) {
        if self.storage.len() < self.capacity {
            self.storage.push(e);
        } else {
            self.storage[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample of `batch` distinct entries.
    pub fn sample(&mut self, batch: usize) -> Result<Vec<Experience>> {
        if batch == 0 || batch > self.storage.len() {
            return Err(AgentError::InsufficientBuffer {
                have: self.storage.len(),
                need: batch.max(1),
            });
        }
        Ok(index::sample(&mut self.rng, self.storage.len(), batch)
            .into_iter()
            .map(|i| self.storage[i].clone())
            .collect())
    }
}

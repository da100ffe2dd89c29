use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng64;

/// One transition. Windows are zero-padded observation histories whose
/// last `obs_len` entries are the current observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub window: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_window: Vec<f64>,
    pub done: bool,
}

/// Bounded FIFO of transitions; the oldest is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::validation("buffer_capacity", "must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, batch: usize, rng: &mut Rng64) -> Result<Vec<&Experience>> {
        if self.items.len() < batch || batch == 0 {
            return Err(Error::InsufficientBuffer {
                have: self.items.len(),
                need: batch.max(1),
            });
        }
        Ok((0..batch).map(|_| &self.items[rng.below(self.items.len())]).collect())
    }
}

//! Fixed-capacity replay ring buffer with uniform minibatch sampling.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::sac::Observation;

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub s: Observation,
    pub a: [f64; 3],
    pub r: f64,
    pub s2: Observation,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            data: Vec::with_capacity(capacity.min(1 << 20)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Uniform sample of `batch` distinct indices.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.data.len() < batch {
            return Err(CoreError::BufferUnderfull {
                have: self.data.len(),
                need: batch,
            });
        }
        Ok(rand::seq::index::sample(rng, self.data.len(), batch).into_vec())
    }
}

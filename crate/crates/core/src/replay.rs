//! Experience storage: FIFO transition buffer, state sampling and running state bounds.

use std::collections::VecDeque;

use rand::Rng;

use crate::envs::Observation;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Observation,
    pub a: usize,
    pub r: f64,
    pub s_next: Observation,
    pub terminal: bool,
    pub truncated: bool,
}

/// Bytes per stored transition: two observations of 8-byte reals, an 8-byte action slot,
/// an 8-byte reward and two flag bytes.
pub fn transition_bytes(state_dim: usize) -> usize {
    2 * state_dim * 8 + 8 + 8 + 2
}

/// Bounded FIFO store of transitions. Pushing into a full buffer evicts the oldest entry.
#[derive(Clone, Debug)]
pub struct TransitionBuffer {
    capacity: usize,
    state_dim: usize,
    storage: VecDeque<Transition>,
    insert_count: u64,
}

impl TransitionBuffer {
    pub fn new(capacity: usize, state_dim: usize) -> Self {
        TransitionBuffer {
            capacity,
            state_dim,
            storage: VecDeque::with_capacity(capacity),
            insert_count: 0,
        }
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

    /// Total pushes ever made, including evicted ones.
    pub fn insert_count(&self) -> u64 {
        self.insert_count
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.s.len() != self.state_dim || t.s_next.len() != self.state_dim {
            return Err(Error::shape(
                "buffer push",
                format!("states of dimension {}", self.state_dim),
                format!("{} and {}", t.s.len(), t.s_next.len()),
            ));
        }
        self.insert_count += 1;
        if self.capacity == 0 {
            return Ok(());
        }
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
        Ok(())
    }

    /// Contents in insertion order (oldest first).
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// The whole buffer in storage order, for agents whose buffer is one mini-batch.
    pub fn all(&self) -> Vec<&Transition> {
        self.storage.iter().collect()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample_transitions<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| &self.storage[rng.gen_range(0..len)]).collect())
    }

    /// The `s` component of `n` transitions drawn uniformly with replacement.
    pub fn sample_states<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&[f64]>> {
        Ok(self
            .sample_transitions(n, rng)?
            .into_iter()
            .map(|t| t.s.as_slice())
            .collect())
    }

    /// Analytic footprint of the buffer at full capacity.
    pub fn bytes(&self) -> usize {
        self.capacity * transition_bytes(self.state_dim)
    }
}

/// Running elementwise box `[low, high]` over every observed state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBounds {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl StateBounds {
    pub fn new(dim: usize) -> Self {
        StateBounds {
            low: vec![f64::INFINITY; dim],
            high: vec![f64::NEG_INFINITY; dim],
        }
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn is_initialized(&self) -> bool {
        self.low.iter().zip(&self.high).all(|(l, h)| l <= h)
    }

    pub fn update(&mut self, s: &[f64]) -> Result<()> {
        if s.len() != self.low.len() {
            return Err(Error::shape("update_bounds", self.low.len(), s.len()));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state {s:?}")));
        }
        for ((lo, hi), &v) in self.low.iter_mut().zip(self.high.iter_mut()).zip(s) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
        Ok(())
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.iter()
            .zip(self.low.iter().zip(&self.high))
            .all(|(v, (l, h))| l <= v && v <= h)
    }

    /// `n` pseudo-states with each component independently uniform on `[low_i, high_i]`.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Observation>> {
        if !self.is_initialized() {
            return Err(Error::UninitializedBounds);
        }
        Ok((0..n)
            .map(|_| {
                self.low
                    .iter()
                    .zip(&self.high)
                    .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..=h) })
                    .collect()
            })
            .collect())
    }
}

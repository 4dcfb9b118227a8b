//! Experience replay.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

/// One decision round: every present agent's observation and action, the
/// shared reward, and what the agents saw at the next round.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Agent-major, `agents * obs_dim`.
    pub obs: Vec<f64>,
    /// Agent-major, `agents * act_dim`.
    pub actions: Vec<f64>,
    /// 1 for agents that acted in this round, else 0.
    pub mask: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_mask: Vec<f64>,
    /// The episode ended after this round.
    pub done: bool,
}

/// Fixed-capacity FIFO ring.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    /// Total insertions so far.
    pub inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(4096)),
            inserted: 0,
        }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
        self.inserted += 1;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform sample without replacement; `None` if fewer than `n` stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if n > self.items.len() {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), n)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

//! Proportional prioritized replay over a fixed-capacity ring buffer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::vehicle::Action;

/// Added to every |TD error| so no transition becomes unreachable.
pub const PRIORITY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// γ, or 0 when the decision sequence ended.
    pub discount_next: f64,
}

/// Binary sum tree over leaf values.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn set(&mut self, i: usize, value: f64) {
        let mut k = i + self.leaves;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[i + self.leaves]
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Leaf whose cumulative interval contains `mass`.
    fn find(&self, mut mass: f64) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if mass < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                mass -= left;
                k = 2 * k + 1;
            }
        }
        k - self.leaves
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    alpha: f64,
    items: Vec<Transition>,
    /// Slot the next push overwrites once full.
    head: usize,
    tree: SumTree,
    max_priority: f64,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub indices: Vec<usize>,
    /// Importance-sampling weights normalised by the batch maximum.
    pub weights: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        ReplayBuffer {
            capacity,
            alpha,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            tree: SumTree::new(capacity.max(1)),
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Inserts with the largest priority seen so far, evicting the oldest
    /// transition when full.
    pub fn push(&mut self, t: Transition) {
        let slot = if self.items.len() < self.capacity {
            self.items.push(t);
            self.items.len() - 1
        } else {
            let slot = self.head;
            self.items[slot] = t;
            self.head = (self.head + 1) % self.capacity;
            slot
        };
        self.tree.set(slot, self.max_priority.powf(self.alpha));
    }

    /// Sampling probability of slot `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    pub fn sample<R: Rng>(&self, batch: usize, beta: f64, rng: &mut R) -> Result<Sample> {
        if self.items.len() < batch || self.items.is_empty() {
            return Err(Error::BufferTooSmall {
                len: self.items.len(),
                batch,
            });
        }
        let total = self.tree.total();
        let n = self.items.len() as f64;
        let mut indices = Vec::with_capacity(batch);
        let mut weights = Vec::with_capacity(batch);
        for _ in 0..batch {
            let u: f64 = rng.random::<f64>() * total;
            let i = self.tree.find(u).min(self.items.len() - 1);
            indices.push(i);
            weights.push((n * self.probability(i)).powf(-beta));
        }
        let max = weights.iter().cloned().fold(f64::MIN, f64::max);
        for w in &mut weights {
            *w /= max;
        }
        Ok(Sample { indices, weights })
    }

    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) {
        for (&i, &e) in indices.iter().zip(td_errors) {
            let p = e.abs() + PRIORITY_EPS;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.alpha));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Substream};

    fn t(r: f64) -> Transition {
        Transition {
            obs: vec![r],
            action: Action::Go,
            reward: r,
            next_obs: vec![r],
            discount_next: 0.0,
        }
    }

    #[test]
    fn alpha_zero_is_uniform() {
        let mut b = ReplayBuffer::new(8, 0.0);
        for k in 0..4 {
            b.push(t(k as f64));
        }
        b.update_priorities(&[0, 1], &[10.0, 0.1]);
        for i in 0..4 {
            assert!((b.probability(i) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn square_root_proportions() {
        let mut b = ReplayBuffer::new(2, 0.5);
        b.push(t(0.0));
        b.push(t(1.0));
        b.update_priorities(&[0, 1], &[4.0 - PRIORITY_EPS, 1.0 - PRIORITY_EPS]);
        assert!((b.probability(0) - 2.0 / 3.0).abs() < 1e-9);
        assert!((b.probability(1) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn near_zero_priority_is_almost_never_drawn() {
        let mut b = ReplayBuffer::new(2, 1.0);
        b.push(t(0.0));
        b.push(t(1.0));
        b.update_priorities(&[0, 1], &[1.0, 0.0]);
        let mut rng = substream(2, Substream::Replay);
        let s = b.sample(2, 0.4, &mut rng).unwrap();
        let hits = (0..1000)
            .map(|_| b.sample(1, 0.4, &mut rng).unwrap().indices[0])
            .filter(|&i| i == 1)
            .count();
        assert_eq!(hits, 0);
        assert_eq!(s.indices.len(), 2);
    }

    #[test]
    fn capacity_and_oldest_first_eviction() {
        let mut b = ReplayBuffer::new(3, 0.5);
        for k in 0..5 {
            b.push(t(k as f64));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn empty_buffer_errors() {
        let b = ReplayBuffer::new(3, 0.5);
        assert!(b.sample(1, 0.4, &mut substream(0, Substream::Replay)).is_err());
    }

    #[test]
    fn new_items_get_max_priority() {
        let mut b = ReplayBuffer::new(4, 1.0);
        b.push(t(0.0));
        b.update_priorities(&[0], &[3.0]);
        b.push(t(1.0));
        assert!((b.probability(1) - 0.5).abs() < 1e-6);
    }
}

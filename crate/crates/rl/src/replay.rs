use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One environment step. States are normalized, the action is the squashed
/// network output in `[-1, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: [f64; 2],
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: [f64; 2],
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

/// Column-stacked minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let n = ts.len();
        Batch {
            states: Array2::from_shape_fn((n, 2), |(i, j)| ts[i].state[j]),
            actions: Array2::from_shape_fn((n, 2), |(i, j)| ts[i].action[j]),
            rewards: Array1::from_shape_fn(n, |i| ts[i].reward),
            next_states: Array2::from_shape_fn((n, 2), |(i, j)| ts[i].next_state[j]),
            dones: Array1::from_shape_fn(n, |i| if ts[i].done { 1.0 } else { 0.0 }),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
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

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.is_full() { self.cursor } else { 0 };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        if self.items.len() < n || n == 0 {
            return Err(Error::InsufficientBuffer {
                have: self.items.len(),
                need: n.max(1),
            });
        }
        let picked: Vec<Transition> = (0..n)
            .map(|_| self.items[rng.random_range(0..self.items.len())])
            .collect();
        Ok(Batch::from_transitions(&picked))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition {
        Transition {
            state: [i as f64, 0.0],
            action: [0.0, 0.0],
            reward: i as f64,
            next_state: [0.0, 0.0],
            done: false,
        }
    }

    #[test]
    fn oldest_is_overwritten_first() {
        let mut b = ReplayBuffer::new(5).unwrap();
        for i in 0..6 {
            b.push(t(i));
        }
        assert_eq!(b.len(), 5);
        let order: Vec<f64> = b.iter().map(|x| x.reward).collect();
        assert_eq!(order, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn sampling_requires_enough_items() {
        let mut b = ReplayBuffer::new(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.push(t(0));
        assert!(matches!(
            b.sample(2, &mut rng),
            Err(Error::InsufficientBuffer { have: 1, need: 2 })
        ));
        b.push(t(1));
        let batch = b.sample(2, &mut rng).unwrap();
        assert_eq!(batch.states.shape(), &[2, 2]);
    }
}

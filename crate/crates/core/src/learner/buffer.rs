use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

/// One replay record.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    /// Pre-clamp policy action in `[-1, 1]^2`.
    pub action: [f64; 2],
    pub reward: f64,
    /// Transition cost per hazard, the safety critic's regression target.
    pub costs: Vec<f64>,
    /// Safety index per hazard at the departure state.
    pub phis: Vec<f64>,
    pub next_observation: Vec<f64>,
    /// Terminal for bootstrapping (goal reached); time-limit truncation is not terminal.
    pub done: bool,
}

/// Column-stacked minibatch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub observations: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub costs: Array2<f64>,
    pub phis: Array2<f64>,
    pub next_observations: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Batch {
        assert!(!items.is_empty(), "empty batch");
        let n = items.len();
        let obs_dim = items[0].observation.len();
        let m = items[0].costs.len();
        let mut b = Batch {
            observations: Array2::zeros((n, obs_dim)),
            actions: Array2::zeros((n, 2)),
            rewards: Array1::zeros(n),
            costs: Array2::zeros((n, m)),
            phis: Array2::zeros((n, m)),
            next_observations: Array2::zeros((n, obs_dim)),
            dones: Array1::zeros(n),
        };
        for (i, t) in items.iter().enumerate() {
            for (j, &v) in t.observation.iter().enumerate() {
                b.observations[[i, j]] = v;
            }
            for (j, &v) in t.next_observation.iter().enumerate() {
                b.next_observations[[i, j]] = v;
            }
            b.actions[[i, 0]] = t.action[0];
            b.actions[[i, 1]] = t.action[1];
            b.rewards[i] = t.reward;
            for j in 0..m {
                b.costs[[i, j]] = t.costs[j];
                b.phis[[i, j]] = t.phis[j];
            }
            b.dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        b
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity FIFO ring with uniform sampling with replacement.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            items: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            cursor: 0,
        })
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

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.cursor] = transition;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::Training("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        if n == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let idx = self.sample_indices(n, rng)?;
        let picked: Vec<&Transition> = idx.iter().map(|&i| &self.items[i]).collect();
        Ok(Batch::from_transitions(&picked))
    }

    /// Transitions in insertion order, oldest first.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }
}

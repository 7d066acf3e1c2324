use rand::Rng;

use crate::batch::Batch;
use crate::error::{Error, Result};
use crate::maze::StackedState;
use crate::nn::{Real, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: StackedState,
    pub action: usize,
    pub reward: f32,
    pub next_state: StackedState,
    pub terminal: bool,
}

/// Fixed-capacity ring with FIFO eviction and uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::new(),
            next: 0,
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Contents in insertion order, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::InvalidArgument("sampling from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| rng.gen_range(0..self.items.len())).collect())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn sample<T: Real, R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch<T>> {
        let idx = self.sample_indices(n, rng)?;
        let dim = self.items[0].state.len();
        let mut s = Vec::with_capacity(n * dim);
        let mut s2 = Vec::with_capacity(n * dim);
        let (mut a, mut r, mut term) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in idx {
            let t = &self.items[i];
            s.extend(t.state.as_slice().iter().map(|&x| T::of(x as f64)));
            s2.extend(t.next_state.as_slice().iter().map(|&x| T::of(x as f64)));
            a.push(t.action);
            r.push(T::of(t.reward as f64));
            term.push(t.terminal);
        }
        Batch::new(Tensor::new(vec![n, dim], s)?, a, r, Tensor::new(vec![n, dim], s2)?, term)
    }
}

/// Stacks states into a `[n, dim]` tensor.
pub fn stack_states<T: Real>(states: &[&StackedState]) -> Result<Tensor<T>> {
    let dim = states.first().map_or(0, |s| s.len());
    let mut data = Vec::with_capacity(states.len() * dim);
    for s in states {
        if s.len() != dim {
            return Err(Error::dim("stack_states", dim, s.len()));
        }
        data.extend(s.as_slice().iter().map(|&x| T::of(x as f64)));
    }
    Tensor::new(vec![states.len(), dim], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::{Observation, StackedState};

    fn tr(i: usize) -> Transition {
        let obs = Observation {
            rays: vec![i as f32],
            goal_mask: vec![0.0],
        };
        let s = StackedState::new(&obs, 1);
        Transition {
            state: s.clone(),
            action: i % 4,
            reward: i as f32,
            next_state: s,
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..5 {
            b.push(tr(i));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f32> = b.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_sample_is_error() {
        let b = ReplayBuffer::new(3).unwrap();
        assert!(b.sample::<f32, _>(2, &mut rand::thread_rng()).is_err());
    }
}

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// A minibatch of transitions laid out for network consumption.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T = f32> {
    /// `[n, state_dim]`
    pub states: Tensor<T>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    /// `[n, state_dim]`
    pub next_states: Tensor<T>,
    pub terminal: Vec<bool>,
}

impl<T: Real> Batch<T> {
    pub fn new(
        states: Tensor<T>,
        actions: Vec<usize>,
        rewards: Vec<T>,
        next_states: Tensor<T>,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        let n = states.rows();
        if states.shape().len() != 2 || next_states.shape() != states.shape() {
            return Err(Error::dim(
                "Batch::new",
                format!("{:?}", states.shape()),
                format!("{:?}", next_states.shape()),
            ));
        }
        if actions.len() != n || rewards.len() != n || terminal.len() != n {
            return Err(Error::dim("Batch::new", n, actions.len().min(rewards.len()).min(terminal.len())));
        }
        Ok(Batch {
            states,
            actions,
            rewards,
            next_states,
            terminal,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn cast<U: Real>(&self) -> Batch<U> {
        Batch {
            states: self.states.cast(),
            actions: self.actions.clone(),
            rewards: self.rewards.iter().map(|r| U::of(r.to_f64().unwrap_or(f64::NAN))).collect(),
            next_states: self.next_states.cast(),
            terminal: self.terminal.clone(),
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

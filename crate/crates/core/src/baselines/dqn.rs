use std::path::Path;

use rand::Rng;

use crate::batch::{argmax, Batch};
use crate::error::{Error, Result};
use crate::maze::{Action, StackedState};
use crate::nn::checkpoint::{load_file, save_file, Header};
use crate::nn::{Mlp, Real, Tensor};
use crate::sf::state_tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferMode {
    /// Keep training every parameter.
    Finetune,
    /// Freeze the encoder; only the Q head trains.
    FixFeature,
}

/// Encoder plus Q head, with target copies of both.
#[derive(Clone, Debug, PartialEq)]
pub struct DqnModel<T = f32> {
    pub encoder: Mlp<T>,
    pub q_head: Mlp<T>,
    pub target_encoder: Mlp<T>,
    pub target_q_head: Mlp<T>,
    pub encoder_frozen: bool,
}

impl<T: Real> DqnModel<T> {
    /// `encoder_dims` runs from the state width to the feature width.
    pub fn new<R: Rng + ?Sized>(encoder_dims: &[usize], head_hidden: usize, n_actions: usize, rng: &mut R) -> Self {
        let encoder = Mlp::new(encoder_dims, rng);
        let q_head = Mlp::new(&[encoder.out_dim(), head_hidden, n_actions], rng);
        DqnModel {
            target_encoder: encoder.clone(),
            target_q_head: q_head.clone(),
            encoder,
            q_head,
            encoder_frozen: false,
        }
    }

    pub fn n_actions(&self) -> usize {
        self.q_head.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn q_values(&self, states: &Tensor<T>) -> Result<Tensor<T>> {
        self.q_head.forward(&self.encoder.forward(states)?)
    }

    pub fn target_q_values(&self, states: &Tensor<T>) -> Result<Tensor<T>> {
        self.target_q_head.forward(&self.target_encoder.forward(states)?)
    }

    pub fn greedy_action(&self, state: &StackedState) -> Result<Action> {
        let q = self.q_values(&state_tensor(state))?;
        Ok(Action::from_index(argmax(q.data())).expect("action index in range"))
    }

    pub fn sync_targets(&mut self) {
        self.target_encoder = self.encoder.clone();
        self.target_q_head = self.q_head.clone();
    }

    /// Squared TD error against `r + γ max_a' Q⁻(s', a')`, or `r` on terminal
    /// transitions. Gradients go to the Q head and, unless frozen, the encoder.
    pub fn dqn_loss(&mut self, batch: &Batch<T>, gamma: f64) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let na = self.n_actions();
        if let Some(&a) = batch.actions.iter().find(|&&a| a >= na) {
            return Err(Error::InvalidArgument(format!("action index {a} out of range")));
        }
        let n = batch.len();
        let gamma = T::of(gamma);
        let q_next = self.target_q_values(&batch.next_states)?;
        let enc = self.encoder.forward_trace(&batch.states)?;
        let head = self.q_head.forward_trace(enc.output())?;
        let q = head.output();
        let mut upstream = Tensor::zeros(vec![n, na]);
        let mut loss = T::zero();
        let scale = T::of(2.0 / n as f64);
        for i in 0..n {
            let mut y = batch.rewards[i];
            if !batch.terminal[i] {
                let best = q_next.row(i).iter().copied().fold(T::neg_infinity(), T::max);
                y += gamma * best;
            }
            let a = batch.actions[i];
            let e = q.row(i)[a] - y;
            loss += e * e;
            upstream.row_mut(i)[a] = scale * e;
        }
        let g_phi = self.q_head.backward(enc.output(), &head, &upstream, !self.encoder_frozen)?;
        if let Some(g) = g_phi {
            self.encoder.backward(&batch.states, &enc, &g, false)?;
        }
        Ok(loss / T::of(n as f64))
    }

    /// Prepares a trained model for the next task. Weights are kept.
    pub fn transfer_init(&mut self, mode: TransferMode) {
        self.encoder_frozen = mode == TransferMode::FixFeature;
        self.sync_targets();
    }

    pub fn trainable_params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<_> = self.q_head.params_mut().map(|(n, t)| (format!("dqn.q_head.{n}"), t)).collect();
        if !self.encoder_frozen {
            out.extend(self.encoder.params_mut().map(|(n, t)| (format!("dqn.encoder.{n}"), t)));
        }
        out
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let parts = [
            ("dqn.encoder.", &self.encoder),
            ("dqn.q_head.", &self.q_head),
            ("dqn.target.encoder.", &self.target_encoder),
            ("dqn.target.q_head.", &self.target_q_head),
        ];
        parts
            .into_iter()
            .flat_map(|(p, m)| m.params().map(move |(n, t)| (format!("{p}{n}"), t)))
            .collect()
    }

    pub fn cast<U: Real>(&self) -> DqnModel<U> {
        DqnModel {
            encoder: self.encoder.cast(),
            q_head: self.q_head.cast(),
            target_encoder: self.target_encoder.cast(),
            target_q_head: self.target_q_head.cast(),
            encoder_frozen: self.encoder_frozen,
        }
    }
}

impl DqnModel<f32> {
    pub fn save(&self, path: &Path, history: usize, rays: usize) -> Result<()> {
        let header = Header {
            phi_dim: self.encoder.out_dim() as u32,
            history: history as u32,
            rays: rays as u32,
            n_actions: self.n_actions() as u32,
            task_count: 1,
            current_task: 0,
        };
        save_file(path, header, self.named_params())
    }

    pub fn load(path: &Path) -> Result<(Self, Header)> {
        let (header, rec) = load_file::<f32>(path)?;
        let model = DqnModel {
            encoder: rec.mlp("dqn.encoder.")?,
            q_head: rec.mlp("dqn.q_head.")?,
            target_encoder: rec.mlp("dqn.target.encoder.")?,
            target_q_head: rec.mlp("dqn.target.q_head.")?,
            encoder_frozen: false,
        };
        Ok((model, header))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(terminal: bool) -> Batch<f64> {
        let s = Tensor::from_f64(vec![1, 3], &[0.1, 0.2, 0.3]).unwrap();
        let s2 = Tensor::from_f64(vec![1, 3], &[0.3, 0.2, 0.1]).unwrap();
        Batch::new(s, vec![2], vec![0.5], s2, vec![terminal]).unwrap()
    }

    #[test]
    fn terminal_or_zero_discount_targets_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = DqnModel::<f64>::new(&[3, 5, 4], 6, 4, &mut rng);
        let q = m.q_values(&batch(false).states).unwrap().row(0)[2];
        let want = (q - 0.5) * (q - 0.5);
        let l_term = m.clone().dqn_loss(&batch(true), 0.9).unwrap();
        let l_zero = m.clone().dqn_loss(&batch(false), 0.0).unwrap();
        assert!((l_term - want).abs() < 1e-12);
        assert!((l_zero - want).abs() < 1e-12);
    }

    #[test]
    fn fix_feature_gives_no_encoder_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = DqnModel::<f64>::new(&[3, 5, 4], 6, 4, &mut rng);
        let before = m.q_values(&batch(false).states).unwrap();
        m.transfer_init(TransferMode::FixFeature);
        assert_eq!(m.q_values(&batch(false).states).unwrap(), before);
        m.dqn_loss(&batch(false), 0.9).unwrap();
        assert!(m.encoder.params().all(|(_, t)| t.grad().map_or(true, |g| g.iter().all(|&x| x == 0.0))));
        let names: Vec<String> = m.trainable_params_mut().into_iter().map(|(n, _)| n).collect();
        assert!(names.iter().all(|n| n.starts_with("dqn.q_head")));
    }
}

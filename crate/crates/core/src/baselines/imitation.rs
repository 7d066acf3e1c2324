use std::path::Path;

use rand::Rng;

use crate::batch::argmax;
use crate::error::{Error, Result};
use crate::maze::{random_start, Action, EnvConfig, MazeEnv, MazeMap, Planner, Pose, StackedState};
use crate::nn::checkpoint::{load_file, save_file, Header};
use crate::nn::{softmax_cross_entropy, Mlp, Real, Tensor};
use crate::sf::state_tensor;

/// Planner-labelled states. Poses are kept for verification only.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub states: Vec<StackedState>,
    pub poses: Vec<Pose>,
    pub labels: Vec<Action>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `idx` as a `[n, state_dim]` tensor plus label indices.
    pub fn gather<T: Real>(&self, idx: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let dim = self.states.first().map_or(0, StackedState::len);
        let mut data = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            data.extend(self.states[i].as_slice().iter().map(|&x| T::of(x as f64)));
        }
        let labels = idx.iter().map(|&i| self.labels[i].index()).collect();
        (Tensor::new(vec![idx.len(), dim], data).expect("shape matches"), labels)
    }

    /// First `train_fraction` of the records for training, the rest held out.
    pub fn split(&self, train_fraction: f64) -> (Vec<usize>, Vec<usize>) {
        let cut = ((self.len() as f64) * train_fraction).round() as usize;
        ((0..cut).collect(), (cut..self.len()).collect())
    }
}

/// Rolls out the planner from uniformly random starts, recording every
/// stacked state on the way with its optimal action, until `n_samples`.
pub fn build_imitation_dataset<R: Rng + ?Sized>(
    map: &MazeMap,
    env_cfg: EnvConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let cfg = EnvConfig {
        slip_prob: 0.0,
        ..env_cfg
    };
    let mut env = MazeEnv::new(map.clone(), cfg, rng.gen());
    let mut planner = Planner::new(map.clone());
    let mut ds = LabeledDataset {
        states: Vec::with_capacity(n_samples),
        poses: Vec::with_capacity(n_samples),
        labels: Vec::with_capacity(n_samples),
    };
    while ds.len() < n_samples {
        let (mut state, mut pose) = env.reset_to(random_start(map, rng));
        loop {
            let a = planner.optimal_action(pose)?;
            if a == Action::Stand || ds.len() >= n_samples {
                break;
            }
            ds.states.push(state.clone());
            ds.poses.push(pose);
            ds.labels.push(a);
            let r = env.step(a);
            state = r.state;
            pose = r.pose;
            if r.terminal {
                break;
            }
        }
    }
    Ok(ds)
}

/// Encoder with a linear softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct ImitationModel<T = f32> {
    pub encoder: Mlp<T>,
    pub head: Mlp<T>,
}

impl<T: Real> ImitationModel<T> {
    pub fn new<R: Rng + ?Sized>(encoder_dims: &[usize], n_actions: usize, rng: &mut R) -> Self {
        let encoder = Mlp::new(encoder_dims, rng);
        let head = Mlp::new(&[encoder.out_dim(), n_actions], rng);
        ImitationModel { encoder, head }
    }

    pub fn logits(&self, states: &Tensor<T>) -> Result<Tensor<T>> {
        self.head.forward(&self.encoder.forward(states)?)
    }

    pub fn greedy_action(&self, state: &StackedState) -> Result<Action> {
        let l = self.logits(&state_tensor(state))?;
        Ok(Action::from_index(argmax(l.data())).expect("action index in range"))
    }

    /// Mean softmax cross-entropy against planner labels.
    pub fn imitation_loss(&mut self, states: &Tensor<T>, labels: &[usize]) -> Result<T> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let enc = self.encoder.forward_trace(states)?;
        let head = self.head.forward_trace(enc.output())?;
        let (loss, g) = softmax_cross_entropy(head.output(), labels)?;
        let g_phi = self.head.backward(enc.output(), &head, &g, true)?.expect("requested");
        self.encoder.backward(states, &enc, &g_phi, false)?;
        Ok(loss)
    }

    /// Fraction of `idx` whose argmax logit equals the label.
    pub fn accuracy(&self, ds: &LabeledDataset, idx: &[usize]) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::InvalidArgument("no samples to score".into()));
        }
        let mut correct = 0usize;
        for chunk in idx.chunks(512) {
            let (x, y) = ds.gather::<T>(chunk);
            let l = self.logits(&x)?;
            correct += y.iter().enumerate().filter(|&(i, &lab)| argmax(l.row(i)) == lab).count();
        }
        Ok(correct as f64 / idx.len() as f64)
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<_> = self.encoder.params_mut().map(|(n, t)| (format!("imit.encoder.{n}"), t)).collect();
        out.extend(self.head.params_mut().map(|(n, t)| (format!("imit.head.{n}"), t)));
        out
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<_> = self.encoder.params().map(|(n, t)| (format!("imit.encoder.{n}"), t)).collect();
        out.extend(self.head.params().map(|(n, t)| (format!("imit.head.{n}"), t)));
        out
    }

    pub fn cast<U: Real>(&self) -> ImitationModel<U> {
        ImitationModel {
            encoder: self.encoder.cast(),
            head: self.head.cast(),
        }
    }
}

impl ImitationModel<f32> {
    pub fn save(&self, path: &Path, history: usize, rays: usize) -> Result<()> {
        let header = Header {
            phi_dim: self.encoder.out_dim() as u32,
            history: history as u32,
            rays: rays as u32,
            n_actions: self.head.out_dim() as u32,
            task_count: 1,
            current_task: 0,
        };
        save_file(path, header, self.named_params())
    }

    pub fn load(path: &Path) -> Result<(Self, Header)> {
        let (header, rec) = load_file::<f32>(path)?;
        let model = ImitationModel {
            encoder: rec.mlp("imit.encoder.")?,
            head: rec.mlp("imit.head.")?,
        };
        Ok((model, header))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::builtin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn labels_match_planner_and_dataset_is_reproducible() {
        let map = builtin("map1").unwrap();
        let cfg = EnvConfig::default();
        let a = build_imitation_dataset(&map, cfg, 300, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = build_imitation_dataset(&map, cfg, 300, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 300);
        let mut planner = Planner::new(map);
        for (p, l) in a.poses.iter().zip(&a.labels) {
            assert_eq!(planner.optimal_action(*p).unwrap(), *l);
        }
    }
}

use rand::Rng;

use crate::batch::argmax;
use crate::error::{Error, Result};
use crate::maze::{Action, StackedState};
use crate::nn::{batch_rows, matmul_nt, Mlp, Real, Tensor};

/// How an old task's Q-values are read out through the current encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OldTaskReadout {
    /// `(Bⁱ ψⁱ(φᵏ, a)) · ωⁱ`: the head produces successor features of the
    /// current features, mapped into task i's feature space afterwards.
    MappedOutput,
    /// `ψⁱ(Bⁱ φᵏ, a) · ωⁱ`: the stored head is fed current features mapped
    /// back into the space it was trained on.
    MappedInput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SfConfig {
    pub phi_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub psi_hidden: usize,
    pub gamma: f64,
    /// Train every task's successor head on current-task samples, not only
    /// the current one.
    pub multitask_sf: bool,
    pub readout: OldTaskReadout,
    pub reward_weight: f64,
    pub reconstruction_weight: f64,
    pub mapping_weight: f64,
}

impl Default for SfConfig {
    fn default() -> Self {
        SfConfig {
            phi_dim: 64,
            encoder_hidden: vec![256, 128],
            decoder_hidden: vec![128, 256],
            psi_hidden: 256,
            gamma: 0.99,
            multitask_sf: false,
            readout: OldTaskReadout::MappedInput,
            reward_weight: 1.0,
            reconstruction_weight: 1.0,
            mapping_weight: 1.0,
        }
    }
}

/// Per-task parameters: reward weights, successor head, feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskHead<T = f32> {
    /// `[φ]`
    pub omega: Tensor<T>,
    /// `φ → hidden → |A|·φ`
    pub psi: Mlp<T>,
    /// `[φ, φ]`, maps current features to this task's features.
    pub b: Tensor<T>,
    /// Encoder snapshot taken when this task stopped being current.
    pub frozen_encoder: Option<Mlp<T>>,
}

/// Encoder, decoder and per-task successor heads with their targets.
#[derive(Clone, Debug, PartialEq)]
pub struct SfModel<T = f32> {
    pub(crate) cfg: SfConfig,
    pub(crate) n_actions: usize,
    pub(crate) encoder: Mlp<T>,
    pub(crate) decoder: Mlp<T>,
    pub(crate) tasks: Vec<TaskHead<T>>,
    pub(crate) current: usize,
    pub(crate) target_heads: Vec<Mlp<T>>,
}

fn dims(first: usize, hidden: &[usize], last: usize) -> Vec<usize> {
    std::iter::once(first)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(last))
        .collect()
}

impl<T: Real> SfModel<T> {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, n_actions: usize, cfg: SfConfig, rng: &mut R) -> Self {
        let encoder = Mlp::new(&dims(input_dim, &cfg.encoder_hidden, cfg.phi_dim), rng);
        let decoder = Mlp::new(&dims(cfg.phi_dim, &cfg.decoder_hidden, input_dim), rng);
        let head = Self::fresh_head(&cfg, n_actions, rng);
        let target_heads = vec![head.psi.clone()];
        SfModel {
            cfg,
            n_actions,
            encoder,
            decoder,
            tasks: vec![head],
            current: 0,
            target_heads,
        }
    }

    fn fresh_head<R: Rng + ?Sized>(cfg: &SfConfig, n_actions: usize, rng: &mut R) -> TaskHead<T> {
        TaskHead {
            omega: Tensor::zeros(vec![cfg.phi_dim]),
            psi: Mlp::new(&[cfg.phi_dim, cfg.psi_hidden, n_actions * cfg.phi_dim], rng),
            b: Tensor::identity(cfg.phi_dim),
            frozen_encoder: None,
        }
    }

    pub fn config(&self) -> &SfConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut SfConfig {
        &mut self.cfg
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn phi_dim(&self) -> usize {
        self.cfg.phi_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn current_task(&self) -> usize {
        self.current
    }

    pub fn task(&self, i: usize) -> Result<&TaskHead<T>> {
        self.tasks
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("task {i} out of range (have {})", self.tasks.len())))
    }

    pub fn task_mut(&mut self, i: usize) -> Result<&mut TaskHead<T>> {
        let n = self.tasks.len();
        self.tasks
            .get_mut(i)
            .ok_or_else(|| Error::InvalidArgument(format!("task {i} out of range (have {n})")))
    }

    pub fn encoder(&self) -> &Mlp<T> {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut Mlp<T> {
        &mut self.encoder
    }

    pub fn decoder(&self) -> &Mlp<T> {
        &self.decoder
    }

    pub fn target_head(&self, i: usize) -> Option<&Mlp<T>> {
        self.target_heads.get(i)
    }

    /// `φᵏ` for a batch of flattened states.
    pub fn encode(&self, states: &Tensor<T>) -> Result<Tensor<T>> {
        self.encoder.forward(states)
    }

    pub fn encode_state(&self, state: &StackedState) -> Result<Tensor<T>> {
        self.encode(&state_tensor(state))
    }

    pub fn decode(&self, phi: &Tensor<T>) -> Result<Tensor<T>> {
        self.decoder.forward(phi)
    }

    /// `ψⁱ(φ, a)` for every action: `[n, |A|, φ]`.
    pub fn successor_forward(&self, task: usize, phi: &Tensor<T>) -> Result<Tensor<T>> {
        let head = self.task(task)?;
        let n = batch_rows("successor_forward", phi, self.cfg.phi_dim)?;
        head.psi.forward(phi)?.reshape(vec![n, self.n_actions, self.cfg.phi_dim])
    }

    /// Q-values `[n, |A|]` for task `task` given current-encoder features.
    pub fn q_from_phi(&self, task: usize, phi: &Tensor<T>) -> Result<Tensor<T>> {
        self.q_with_heads(task, phi, false)
    }

    /// Same as [`q_from_phi`](Self::q_from_phi) through the target heads.
    pub fn target_q_from_phi(&self, task: usize, phi: &Tensor<T>) -> Result<Tensor<T>> {
        self.q_with_heads(task, phi, true)
    }

    /// Raw head outputs `[n, |A|·φ]` and the reward weights they are read
    /// out with, following the task's readout rule.
    pub(crate) fn readout_parts(&self, task: usize, phi: &Tensor<T>, target: bool) -> Result<(Tensor<T>, Vec<T>)> {
        let head = self.task(task)?;
        let psi_net = if target { &self.target_heads[task] } else { &head.psi };
        if task == self.current {
            return Ok((psi_net.forward(phi)?, head.omega.data().to_vec()));
        }
        match self.cfg.readout {
            OldTaskReadout::MappedOutput => {
                // (B ψ)·ω = ψ·(Bᵀ ω)
                let d = self.cfg.phi_dim;
                let b = head.b.data();
                let w = (0..d)
                    .map(|j| (0..d).map(|o| b[o * d + j] * head.omega.data()[o]).sum())
                    .collect();
                Ok((psi_net.forward(phi)?, w))
            }
            OldTaskReadout::MappedInput => {
                let mapped = matmul_nt(&as_matrix(phi, self.cfg.phi_dim)?, &head.b)?;
                Ok((psi_net.forward(&mapped)?, head.omega.data().to_vec()))
            }
        }
    }

    fn q_with_heads(&self, task: usize, phi: &Tensor<T>, target: bool) -> Result<Tensor<T>> {
        let (psi, w) = self.readout_parts(task, phi, target)?;
        Ok(contract_actions(&psi, &w, self.n_actions))
    }

    /// `Qⁱ(s, ·)` for a batch of flattened states: `[n, |A|]`.
    pub fn q_values(&self, task: usize, states: &Tensor<T>) -> Result<Tensor<T>> {
        let phi = self.encode(states)?;
        self.q_from_phi(task, &phi)
    }

    pub fn q_values_state(&self, task: usize, state: &StackedState) -> Result<Vec<T>> {
        Ok(self.q_values(task, &state_tensor(state))?.into_data())
    }

    pub fn greedy_action(&self, task: usize, state: &StackedState) -> Result<Action> {
        let q = self.q_values_state(task, state)?;
        Ok(Action::from_index(argmax(&q)).expect("action index in range"))
    }

    /// ε-greedy action; greedy ties resolve to the lowest action index.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        task: usize,
        state: &StackedState,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Action> {
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            return Ok(Action::from_index(rng.gen_range(0..self.n_actions)).expect("in range"));
        }
        self.greedy_action(task, state)
    }

    /// Copies every live successor head into its target.
    pub fn sync_targets(&mut self) {
        for (t, h) in self.target_heads.iter_mut().zip(&self.tasks) {
            *t = h.psi.clone();
        }
    }

    /// Starts a new task and makes it current.
    ///
    /// The outgoing task keeps a snapshot of the encoder and a feature map
    /// initialised to the identity. With `copy_init` the new head starts from
    /// the previous head and reward weights; otherwise from a fresh head with
    /// zero reward weights.
    pub fn add_task<R: Rng + ?Sized>(&mut self, copy_init: bool, rng: &mut R) -> usize {
        let prev = self.current;
        let snapshot = self.encoder.clone();
        {
            let old = &mut self.tasks[prev];
            old.frozen_encoder = Some(snapshot);
            old.b = Tensor::identity(self.cfg.phi_dim);
        }
        let head = if copy_init {
            let old = &self.tasks[prev];
            TaskHead {
                omega: old.omega.clone(),
                psi: old.psi.clone(),
                b: Tensor::identity(self.cfg.phi_dim),
                frozen_encoder: None,
            }
        } else {
            Self::fresh_head(&self.cfg, self.n_actions, rng)
        };
        self.target_heads.push(head.psi.clone());
        self.tasks.push(head);
        self.current = self.tasks.len() - 1;
        self.current
    }

    /// Every tensor, by checkpoint name.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        out.extend(self.encoder.params().map(|(n, t)| (format!("encoder.{n}"), t)));
        out.extend(self.decoder.params().map(|(n, t)| (format!("decoder.{n}"), t)));
        for (i, h) in self.tasks.iter().enumerate() {
            out.extend(h.psi.params().map(|(n, t)| (format!("task{i}.psi.{n}"), t)));
            out.push((format!("task{i}.B"), &h.b));
            out.push((format!("task{i}.omega"), &h.omega));
            if let Some(fe) = &h.frozen_encoder {
                out.extend(fe.params().map(|(n, t)| (format!("task{i}.frozen_encoder.{n}"), t)));
            }
        }
        for (i, t) in self.target_heads.iter().enumerate() {
            out.extend(t.params().map(|(n, p)| (format!("target.task{i}.psi.{n}"), p)));
        }
        out
    }

    /// Live, trainable-in-principle tensors (no targets or snapshots).
    pub fn live_params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        out.extend(self.encoder.params_mut().map(|(n, t)| (format!("encoder.{n}"), t)));
        out.extend(self.decoder.params_mut().map(|(n, t)| (format!("decoder.{n}"), t)));
        for (i, h) in self.tasks.iter_mut().enumerate() {
            out.extend(h.psi.params_mut().map(|(n, t)| (format!("task{i}.psi.{n}"), t)));
            out.push((format!("task{i}.B"), &mut h.b));
            out.push((format!("task{i}.omega"), &mut h.omega));
        }
        out
    }

    /// Tensors updated by the successor-feature objective.
    pub fn td_params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let current = self.current;
        let all = self.cfg.multitask_sf;
        self.tasks
            .iter_mut()
            .enumerate()
            .filter(|(i, _)| all || *i == current)
            .flat_map(|(i, h)| h.psi.params_mut().map(move |(n, t)| (format!("task{i}.psi.{n}"), t)))
            .collect()
    }

    /// Tensors updated by the feature objective: encoder, decoder, current
    /// reward weights and every old task's feature map.
    pub fn phi_params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let current = self.current;
        let mut out = Vec::new();
        out.extend(self.encoder.params_mut().map(|(n, t)| (format!("encoder.{n}"), t)));
        out.extend(self.decoder.params_mut().map(|(n, t)| (format!("decoder.{n}"), t)));
        for (i, h) in self.tasks.iter_mut().enumerate() {
            if i == current {
                out.push((format!("task{i}.omega"), &mut h.omega));
            } else {
                out.push((format!("task{i}.B"), &mut h.b));
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for (_, t) in self.live_params_mut() {
            t.zero_grad();
        }
    }

    pub fn cast<U: Real>(&self) -> SfModel<U> {
        SfModel {
            cfg: self.cfg.clone(),
            n_actions: self.n_actions,
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
            tasks: self
                .tasks
                .iter()
                .map(|h| TaskHead {
                    omega: h.omega.cast(),
                    psi: h.psi.cast(),
                    b: h.b.cast(),
                    frozen_encoder: h.frozen_encoder.as_ref().map(Mlp::cast),
                })
                .collect(),
            current: self.current,
            target_heads: self.target_heads.iter().map(Mlp::cast).collect(),
        }
    }
}

pub(crate) fn as_matrix<T: Real>(t: &Tensor<T>, width: usize) -> Result<Tensor<T>> {
    let n = batch_rows("as_matrix", t, width)?;
    if t.shape().len() == 2 {
        Ok(t.clone())
    } else {
        t.clone().reshape(vec![n, width])
    }
}

/// `q[n, a] = Σ_j ψ[n, a·φ + j] · w[j]`.
pub(crate) fn contract_actions<T: Real>(psi: &Tensor<T>, w: &[T], n_actions: usize) -> Tensor<T> {
    let d = w.len();
    let n = psi.len() / (n_actions * d);
    let mut q = Tensor::zeros(vec![n, n_actions]);
    for (row, out) in psi.data().chunks(n_actions * d).zip(q.data_mut().chunks_mut(n_actions)) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = row[a * d..(a + 1) * d].iter().zip(w).map(|(&p, &wj)| p * wj).sum();
        }
    }
    q
}

pub fn state_tensor<T: Real>(state: &StackedState) -> Tensor<T> {
    let data = state.as_slice().iter().map(|&x| T::of(x as f64)).collect();
    Tensor::new(vec![1, state.len()], data).expect("shape matches")
}

use crate::batch::{argmax, Batch};
use crate::error::{Error, Result};
use crate::nn::{matmul_nn, matmul_nt, matmul_tn_acc, mse_and_grad, Real, Tensor};
use crate::sf::model::{as_matrix, OldTaskReadout, SfModel};

/// States retained from an earlier task, used to fit that task's feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct RetainedBatch<T = f32> {
    pub task: usize,
    /// `[n, state_dim]`
    pub states: Tensor<T>,
}

/// Components of the feature objective, already weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhiLoss<T = f32> {
    pub reward: T,
    pub reconstruction: T,
    pub mapping: T,
}

impl<T: Real> PhiLoss<T> {
    pub fn total(&self) -> T {
        self.reward + self.reconstruction + self.mapping
    }
}

impl<T: Real> SfModel<T> {
    /// Features a task's successor head consumes, given current features.
    pub(crate) fn head_input(&self, task: usize, phi: &Tensor<T>) -> Result<Tensor<T>> {
        if task != self.current && self.cfg.readout == OldTaskReadout::MappedInput {
            matmul_nt(&as_matrix(phi, self.cfg.phi_dim)?, &self.tasks[task].b)
        } else {
            as_matrix(phi, self.cfg.phi_dim)
        }
    }

    fn td_task_targets(&self, task: usize, phi_next: &Tensor<T>, batch: &Batch<T>) -> Result<Tensor<T>> {
        let d = self.cfg.phi_dim;
        let gamma = T::of(self.cfg.gamma);
        let cumulant = self.head_input(task, phi_next)?;
        let q_next = self.q_from_phi(task, phi_next)?;
        let boot = self.target_heads[task].forward(&cumulant)?;
        let mut y = cumulant.clone();
        for n in 0..batch.len() {
            if batch.terminal[n] {
                continue;
            }
            let a_star = argmax(q_next.row(n));
            let seg = &boot.row(n)[a_star * d..(a_star + 1) * d];
            for (yj, &bj) in y.row_mut(n).iter_mut().zip(seg) {
                *yj += gamma * bj;
            }
        }
        Ok(y)
    }

    /// Successor-feature TD loss on a batch from the current task.
    ///
    /// The target is `φ(s') + γ ψ⁻(φ(s'), a*)` with `a*` greedy under the live
    /// Q-values, or `φ(s')` alone on terminal transitions. Gradients flow only
    /// into successor heads (the current one, or all with multi-task
    /// training). Returns the summed per-task mean squared error.
    pub fn sf_td_loss(&mut self, batch: &Batch<T>) -> Result<T> {
        let d = self.cfg.phi_dim;
        let na = self.n_actions;
        if let Some(&a) = batch.actions.iter().find(|&&a| a >= na) {
            return Err(Error::InvalidArgument(format!("action index {a} out of range")));
        }
        let phi = self.encode(&batch.states)?;
        let phi_next = self.encode(&batch.next_states)?;
        let tasks: Vec<usize> = if self.cfg.multitask_sf {
            (0..self.tasks.len()).collect()
        } else {
            vec![self.current]
        };
        let n = batch.len();
        let scale = T::of(2.0 / (n * d) as f64);
        let mut total = T::zero();
        for task in tasks {
            let y = self.td_task_targets(task, &phi_next, batch)?;
            let x = self.head_input(task, &phi)?;
            let trace = self.tasks[task].psi.forward_trace(&x)?;
            let out = trace.output();
            let mut upstream = Tensor::zeros(vec![n, na * d]);
            let mut loss = T::zero();
            for i in 0..n {
                let a = batch.actions[i];
                let pred = &out.row(i)[a * d..(a + 1) * d];
                let g = &mut upstream.row_mut(i)[a * d..(a + 1) * d];
                for ((gj, &p), &t) in g.iter_mut().zip(pred).zip(y.row(i)) {
                    let e = p - t;
                    loss += e * e;
                    *gj = scale * e;
                }
            }
            self.tasks[task].psi.backward(&x, &trace, &upstream, false)?;
            total += loss / T::of((n * d) as f64);
        }
        Ok(total)
    }

    /// Feature objective: reward regression and reconstruction on arrival
    /// states, plus one feature-map regression per retained batch.
    ///
    /// Gradients go to the encoder, decoder, current reward weights and the
    /// feature maps of old tasks.
    pub fn phi_loss(&mut self, batch: &Batch<T>, retained: &[RetainedBatch<T>]) -> Result<PhiLoss<T>> {
        let d = self.cfg.phi_dim;
        let k = self.current;
        for r in retained {
            if r.task >= self.tasks.len() || r.task == k {
                return Err(Error::InvalidArgument(format!(
                    "retained batch refers to task {} but only old tasks 0..{k} have feature maps",
                    r.task
                )));
            }
            if self.tasks[r.task].frozen_encoder.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "task {} has no encoder snapshot",
                    r.task
                )));
            }
        }
        let n = batch.len();
        let states = &batch.next_states;
        let enc_trace = self.encoder.forward_trace(states)?;
        let phi = enc_trace.output().clone();

        // Reward regression.
        let wr = T::of(self.cfg.reward_weight);
        let omega = self.tasks[k].omega.data().to_vec();
        let mut g_phi = Tensor::zeros(vec![n, d]);
        let mut g_omega = vec![T::zero(); d];
        let mut reward_loss = T::zero();
        let two_over_n = T::of(2.0 / n as f64);
        for i in 0..n {
            let row = phi.row(i);
            let e = row.iter().zip(&omega).map(|(&p, &w)| p * w).sum::<T>() - batch.rewards[i];
            reward_loss += e * e;
            let c = wr * two_over_n * e;
            for (g, &w) in g_phi.row_mut(i).iter_mut().zip(&omega) {
                *g += c * w;
            }
            for (g, &p) in g_omega.iter_mut().zip(row) {
                *g += c * p;
            }
        }
        let reward_loss = wr * reward_loss / T::of(n as f64);
        for (g, v) in self.tasks[k].omega.grad_mut().iter_mut().zip(g_omega) {
            *g += v;
        }

        // Reconstruction.
        let wc = T::of(self.cfg.reconstruction_weight);
        let dec_trace = self.decoder.forward_trace(&phi)?;
        let (recon, g_recon) = mse_and_grad(dec_trace.output(), states)?;
        let g_recon = g_recon.map(|g| g * wc);
        let g_dec = self
            .decoder
            .backward(&phi, &dec_trace, &g_recon, true)?
            .expect("input grad requested");
        for (g, &v) in g_phi.data_mut().iter_mut().zip(g_dec.data()) {
            *g += v;
        }
        self.encoder.backward(states, &enc_trace, &g_phi, false)?;

        // Feature maps for old tasks.
        let wm = T::of(self.cfg.mapping_weight);
        let mut mapping = T::zero();
        for r in retained {
            let target = self.tasks[r.task]
                .frozen_encoder
                .as_ref()
                .expect("checked above")
                .forward(&r.states)?;
            let tr = self.encoder.forward_trace(&r.states)?;
            let cur = tr.output();
            let pred = matmul_nt(cur, &self.tasks[r.task].b)?;
            let (l, g) = mse_and_grad(&pred, &target)?;
            let g = g.map(|v| v * wm);
            mapping += wm * l;
            matmul_tn_acc(&g, cur, self.tasks[r.task].b.grad_mut())?;
            let g_cur = matmul_nn(&g, &self.tasks[r.task].b)?;
            self.encoder.backward(&r.states, &tr, &g_cur, false)?;
        }

        Ok(PhiLoss {
            reward: reward_loss,
            reconstruction: wc * recon,
            mapping,
        })
    }
}

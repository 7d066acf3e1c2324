use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_file, save_file, Header, Records};
use crate::nn::{Mlp, Real};
use crate::sf::model::{SfConfig, SfModel, TaskHead};

fn hidden(m: &Mlp) -> Vec<usize> {
    let d = m.dims();
    d[1..d.len() - 1].to_vec()
}

impl SfModel<f32> {
    pub fn header(&self, history: usize, rays: usize) -> Header {
        Header {
            phi_dim: self.cfg.phi_dim as u32,
            history: history as u32,
            rays: rays as u32,
            n_actions: self.n_actions as u32,
            task_count: self.tasks.len() as u32,
            current_task: self.current as u32,
        }
    }

    /// Writes every tensor, including targets and encoder snapshots.
    pub fn save(&self, path: &Path, history: usize, rays: usize) -> Result<()> {
        save_file(path, self.header(history, rays), self.named_params())
    }

    /// Rebuilds a model from [`save`](Self::save) output. Layer sizes come
    /// from the stored shapes; training settings (`gamma`, readout, loss
    /// weights) are taken from `base`.
    pub fn load(path: &Path, base: SfConfig) -> Result<(Self, Header)> {
        let (header, rec) = load_file::<f32>(path)?;
        Ok((Self::from_records(&header, &rec, base)?, header))
    }

    pub fn from_records(header: &Header, rec: &Records<f32>, base: SfConfig) -> Result<Self> {
        let encoder = rec.mlp("encoder.")?;
        let decoder = rec.mlp("decoder.")?;
        let n_tasks = header.task_count as usize;
        if n_tasks == 0 || header.current_task >= header.task_count {
            return Err(Error::Checkpoint(format!(
                "bad task header: count {} current {}",
                header.task_count, header.current_task
            )));
        }
        let mut tasks = Vec::with_capacity(n_tasks);
        let mut target_heads = Vec::with_capacity(n_tasks);
        for i in 0..n_tasks {
            let fe = format!("task{i}.frozen_encoder.");
            tasks.push(TaskHead {
                omega: rec.get(&format!("task{i}.omega"))?.clone(),
                psi: rec.mlp(&format!("task{i}.psi."))?,
                b: rec.get(&format!("task{i}.B"))?.clone(),
                frozen_encoder: if rec.contains(&format!("{fe}L0.W")) {
                    Some(rec.mlp(&fe)?)
                } else {
                    None
                },
            });
            target_heads.push(rec.mlp(&format!("target.task{i}.psi."))?);
        }
        let phi_dim = header.phi_dim as usize;
        let n_actions = header.n_actions as usize;
        if encoder.out_dim() != phi_dim || tasks[0].psi.out_dim() != phi_dim * n_actions {
            return Err(Error::Checkpoint("stored shapes disagree with header".into()));
        }
        let cfg = SfConfig {
            phi_dim,
            encoder_hidden: hidden(&encoder),
            decoder_hidden: hidden(&decoder),
            psi_hidden: tasks[0].psi.dims()[1],
            ..base
        };
        Ok(SfModel {
            cfg,
            n_actions,
            encoder,
            decoder,
            tasks,
            current: header.current_task as usize,
            target_heads,
        })
    }
}

impl<T: Real> SfModel<T> {
    /// Total scalar parameter count of live tensors.
    pub fn param_count(&self) -> usize {
        self.named_params()
            .iter()
            .filter(|(n, _)| !n.starts_with("target.") && !n.contains("frozen_encoder"))
            .map(|(_, t)| t.len())
            .sum()
    }
}

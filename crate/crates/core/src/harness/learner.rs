use std::hash::{Hash, Hasher};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{DqnModel, TransferMode};
use crate::error::{Error, Result};
use crate::harness::replay::{stack_states, ReplayBuffer};
use crate::harness::schedule::TrainSchedule;
use crate::maze::{Action, StackedState};
use crate::nn::{Adam, AdamConfig, Tensor};
use crate::sf::{RetainedBatch, SfModel};

/// Mean losses of one update; `None` where a learner has no such term.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossValues {
    pub sf: Option<f64>,
    pub phi: Option<f64>,
    pub q: Option<f64>,
}

/// A reinforcement learner driven by the training loop.
pub trait Learner {
    fn current_task(&self) -> usize;
    fn act(&self, state: &StackedState, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Action>;
    fn greedy(&self, task: usize, state: &StackedState) -> Result<Action>;
    fn update(&mut self, replay: &ReplayBuffer, schedule: &TrainSchedule, rng: &mut ChaCha8Rng) -> Result<LossValues>;
    fn sync_targets(&mut self);
    /// Called when the current task ends and another one follows.
    fn next_task(&mut self, replay: &ReplayBuffer, schedule: &TrainSchedule, rng: &mut ChaCha8Rng) -> Result<()>;
    fn save(&self, path: &Path, history: usize, rays: usize) -> Result<()>;
    /// Hash of every parameter's bit pattern.
    fn param_hash(&self) -> u64;
}

fn hash_tensors<'a>(it: impl IntoIterator<Item = (String, &'a Tensor<f32>)>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for (name, t) in it {
        name.hash(&mut h);
        for x in t.data() {
            x.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

fn check_loss(name: &str, v: f32, step: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v as f64)
    } else {
        Err(Error::NonFinite {
            param: name.to_string(),
            step,
        })
    }
}

/// Successor-feature learner with per-task retained states.
pub struct SfLearner {
    pub model: SfModel<f32>,
    opt: Adam<f32>,
    /// Retained states of each finished task, by task index.
    pub retained: Vec<Vec<StackedState>>,
    /// Start a new task's head from the previous one.
    pub copy_init: bool,
    updates: u64,
}

impl SfLearner {
    pub fn new(model: SfModel<f32>, learning_rate: f64, copy_init: bool) -> Self {
        SfLearner {
            model,
            opt: Adam::new(AdamConfig::with_lr(learning_rate)),
            retained: Vec::new(),
            copy_init,
            updates: 0,
        }
    }

    fn retained_batches(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<RetainedBatch<f32>>> {
        let mut out = Vec::new();
        for (task, states) in self.retained.iter().enumerate() {
            if states.is_empty() {
                continue;
            }
            let picked: Vec<&StackedState> = (0..n).map(|_| &states[rng.gen_range(0..states.len())]).collect();
            out.push(RetainedBatch {
                task,
                states: stack_states(&picked)?,
            });
        }
        Ok(out)
    }
}

impl Learner for SfLearner {
    fn current_task(&self) -> usize {
        self.model.current_task()
    }

    fn act(&self, state: &StackedState, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Action> {
        self.model.select_action(self.model.current_task(), state, epsilon, rng)
    }

    fn greedy(&self, task: usize, state: &StackedState) -> Result<Action> {
        self.model.greedy_action(task, state)
    }

    fn update(&mut self, replay: &ReplayBuffer, schedule: &TrainSchedule, rng: &mut ChaCha8Rng) -> Result<LossValues> {
        let step = self.updates;
        self.updates += 1;
        let batch = replay.sample::<f32, _>(schedule.batch_size, rng)?;
        let sf = self.model.sf_td_loss(&batch)?;
        let sf = check_loss("loss_sf", sf, step)?;
        self.opt.step(self.model.td_params_mut())?;
        let mut phi_sum = 0.0;
        let rounds = schedule.phi_updates_per_update.max(1);
        for r in 0..rounds {
            let b = if r == 0 {
                batch.clone()
            } else {
                replay.sample::<f32, _>(schedule.batch_size, rng)?
            };
            let retained = self.retained_batches(schedule.batch_size, rng)?;
            let phi = self.model.phi_loss(&b, &retained)?.total();
            phi_sum += check_loss("loss_phi", phi, step)?;
            self.opt.step(self.model.phi_params_mut())?;
        }
        Ok(LossValues {
            sf: Some(sf),
            phi: Some(phi_sum / rounds as f64),
            q: None,
        })
    }

    fn sync_targets(&mut self) {
        self.model.sync_targets();
    }

    fn next_task(&mut self, replay: &ReplayBuffer, schedule: &TrainSchedule, rng: &mut ChaCha8Rng) -> Result<()> {
        let all: Vec<&StackedState> = replay.iter().map(|t| &t.next_state).collect();
        let keep = schedule.retained_states.min(all.len());
        let mut idx = sample(rng, all.len(), keep).into_vec();
        idx.sort_unstable();
        let task = self.model.current_task();
        if self.retained.len() <= task {
            self.retained.resize(task + 1, Vec::new());
        }
        self.retained[task] = idx.into_iter().map(|i| all[i].clone()).collect();
        self.model.add_task(self.copy_init, rng);
        Ok(())
    }

    fn save(&self, path: &Path, history: usize, rays: usize) -> Result<()> {
        self.model.save(path, history, rays)
    }

    fn param_hash(&self) -> u64 {
        hash_tensors(self.model.named_params())
    }
}

/// DQN learner. With a transfer mode, later tasks continue from the
/// trained network; without one, a sequence of tasks is rejected.
pub struct DqnLearner {
    pub model: DqnModel<f32>,
    opt: Adam<f32>,
    transfer: Option<TransferMode>,
    task: usize,
    updates: u64,
}

impl DqnLearner {
    pub fn new(model: DqnModel<f32>, learning_rate: f64, transfer: Option<TransferMode>) -> Self {
        DqnLearner {
            model,
            opt: Adam::new(AdamConfig::with_lr(learning_rate)),
            transfer,
            task: 0,
            updates: 0,
        }
    }
}

impl Learner for DqnLearner {
    fn current_task(&self) -> usize {
        self.task
    }

    fn act(&self, state: &StackedState, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Action> {
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            return Ok(Action::from_index(rng.gen_range(0..self.model.n_actions())).expect("in range"));
        }
        self.model.greedy_action(state)
    }

    fn greedy(&self, _task: usize, state: &StackedState) -> Result<Action> {
        self.model.greedy_action(state)
    }

    fn update(&mut self, replay: &ReplayBuffer, schedule: &TrainSchedule, rng: &mut ChaCha8Rng) -> Result<LossValues> {
        let step = self.updates;
        self.updates += 1;
        let batch = replay.sample::<f32, _>(schedule.batch_size, rng)?;
        let q = self.model.dqn_loss(&batch, schedule.gamma)?;
        let q = check_loss("loss_q", q, step)?;
        self.opt.step(self.model.trainable_params_mut())?;
        Ok(LossValues {
            q: Some(q),
            ..Default::default()
        })
    }

    fn sync_targets(&mut self) {
        self.model.sync_targets();
    }

    fn next_task(&mut self, _replay: &ReplayBuffer, _schedule: &TrainSchedule, _rng: &mut ChaCha8Rng) -> Result<()> {
        let mode = self
            .transfer
            .ok_or_else(|| Error::InvalidArgument("plain DQN does not support task sequences".into()))?;
        self.model.transfer_init(mode);
        self.task += 1;
        Ok(())
    }

    fn save(&self, path: &Path, history: usize, rays: usize) -> Result<()> {
        self.model.save(path, history, rays)
    }

    fn param_hash(&self) -> u64 {
        hash_tensors(self.model.named_params())
    }
}

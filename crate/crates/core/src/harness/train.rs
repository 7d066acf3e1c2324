use std::path::PathBuf;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::eval::{eval_seed, evaluate, EvalSummary};
use crate::harness::learner::{Learner, LossValues};
use crate::harness::metrics::{matrix_csv, metrics_csv, write_atomic, MatrixRow, MetricsRow};
use crate::harness::replay::{ReplayBuffer, Transition};
use crate::harness::schedule::{steps_to_convergence, TrainSchedule, CONVERGENCE_SUCCESS};
use crate::maze::{EnvConfig, MazeEnv, MazeMap};
use crate::rng::{rng_for, stream};

/// Run-wide settings shared by every stage.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub env: EnvConfig,
    /// Episodes per cross-task matrix cell.
    pub matrix_episodes: usize,
    /// Where periodic checkpoints and metrics are written, if anywhere.
    pub output_dir: Option<PathBuf>,
    pub record_wall_clock: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            env: EnvConfig::default(),
            matrix_episodes: 50,
            output_dir: None,
            record_wall_clock: false,
        }
    }
}

/// Result of training on one task.
pub struct StageOutcome {
    pub task: usize,
    pub rows: Vec<MetricsRow>,
    pub env_steps: u64,
    pub updates: u64,
    /// Step of the first of two consecutive evaluations at ≥ 0.9 success.
    pub converged_at: Option<u64>,
    /// Set when training stopped on a non-finite loss or parameter.
    pub halt: Option<Error>,
    pub replay: ReplayBuffer,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HALT_CHECKPOINT_FILE: &str = "halt_checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MATRIX_FILE: &str = "cross_task.csv";

#[derive(Default)]
struct LossAccumulator {
    sums: [f64; 3],
    counts: [u64; 3],
}

impl LossAccumulator {
    fn add(&mut self, l: LossValues) {
        for (i, v) in [l.sf, l.phi, l.q].into_iter().enumerate() {
            if let Some(v) = v {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    fn take(&mut self) -> [Option<f64>; 3] {
        let out = std::array::from_fn(|i| (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64));
        *self = LossAccumulator::default();
        out
    }
}

fn save_checkpoint(learner: &dyn Learner, opts: &RunOptions, name: &str) -> Result<()> {
    if let Some(dir) = &opts.output_dir {
        let path = dir.join(name);
        let tmp = path.with_extension("tmp");
        learner.save(&tmp, opts.env.history, opts.env.sensor.rays)?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::file(&path, e))?;
    }
    Ok(())
}

/// Evaluates the learner's greedy policy for `task` on `map`.
pub fn evaluate_learner(
    learner: &dyn Learner,
    task: usize,
    map: &MazeMap,
    env: EnvConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalSummary> {
    let mut policy = |s: &crate::maze::StackedState, _| learner.greedy(task, s);
    evaluate(&mut policy, map, env, episodes, seed)
}

/// Trains the learner's current task on `map`.
///
/// Acts ε-greedily, stores every transition, performs one update every
/// `update_every` steps after warmup, syncs targets every
/// `target_sync_every` updates and evaluates every `eval_every` steps.
/// `prior_rows` are earlier stages' rows, rewritten alongside this stage's
/// metrics.
pub fn run_training(
    learner: &mut dyn Learner,
    map: &MazeMap,
    schedule: &TrainSchedule,
    opts: &RunOptions,
    prior_rows: &[MetricsRow],
) -> Result<StageOutcome> {
    schedule.validate()?;
    let task = learner.current_task();
    let t = task as u64;
    let mut env = MazeEnv::new(map.clone(), opts.env, stream(opts.seed, 100 + t));
    let mut act_rng = rng_for(opts.seed, 200 + t);
    let mut sample_rng = rng_for(opts.seed, 300 + t);
    let mut replay = ReplayBuffer::new(schedule.buffer_capacity)?;
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut losses = LossAccumulator::default();
    let mut updates = 0u64;
    let mut evals: Vec<(u64, f64)> = Vec::new();
    let started = Instant::now();
    let (mut state, _) = env.reset();
    let mut step = 0u64;
    let mut halt = None;

    save_checkpoint(learner, opts, CHECKPOINT_FILE)?;
    while step < schedule.total_steps {
        let eps = schedule.epsilon(step);
        let action = learner.act(&state, eps, &mut act_rng)?;
        let r = env.step(action);
        step += 1;
        let done = r.terminal || r.truncated;
        replay.push(Transition {
            state: std::mem::replace(&mut state, r.state.clone()),
            action: action.index(),
            reward: r.reward as f32,
            next_state: r.state,
            terminal: r.terminal,
        });
        if done {
            state = env.reset().0;
        }

        if schedule.is_update_step(step) {
            match learner.update(&replay, schedule, &mut sample_rng) {
                Ok(l) => losses.add(l),
                Err(e @ Error::NonFinite { .. }) => {
                    save_checkpoint(learner, opts, HALT_CHECKPOINT_FILE)?;
                    halt = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
            updates += 1;
            if updates % schedule.target_sync_every == 0 {
                learner.sync_targets();
            }
        }

        if step % schedule.eval_every == 0 {
            let index = step / schedule.eval_every;
            let summary = evaluate_learner(
                learner,
                task,
                map,
                opts.env,
                schedule.eval_episodes,
                eval_seed(opts.seed, task, index),
            )?;
            let [loss_sf, loss_phi, loss_q] = losses.take();
            rows.push(MetricsRow {
                step,
                task_id: task,
                mean_reward: summary.mean_reward,
                std_reward: summary.std_reward,
                success_ratio: summary.success_ratio(),
                mean_steps: summary.mean_steps,
                loss_sf,
                loss_phi,
                loss_q,
                epsilon: eps,
                wall_ms: opts
                    .record_wall_clock
                    .then(|| started.elapsed().as_secs_f64() * 1e3),
            });
            evals.push((step, summary.success_ratio()));
            if let Some(dir) = &opts.output_dir {
                let all: Vec<MetricsRow> = prior_rows.iter().chain(&rows).cloned().collect();
                write_atomic(&dir.join(METRICS_FILE), metrics_csv(&all).as_bytes())?;
            }
            save_checkpoint(learner, opts, CHECKPOINT_FILE)?;
            if schedule.stop_on_convergence
                && evals.len() >= 2
                && evals[evals.len() - 2..].iter().all(|e| e.1 >= CONVERGENCE_SUCCESS)
            {
                break;
            }
        }
    }
    if halt.is_none() {
        save_checkpoint(learner, opts, CHECKPOINT_FILE)?;
    }
    if let Some(dir) = &opts.output_dir {
        let all: Vec<MetricsRow> = prior_rows.iter().chain(&rows).cloned().collect();
        write_atomic(&dir.join(METRICS_FILE), metrics_csv(&all).as_bytes())?;
    }
    Ok(StageOutcome {
        task,
        rows,
        env_steps: step,
        updates,
        converged_at: steps_to_convergence(&evals),
        halt,
        replay,
    })
}

/// Per-stage outcomes plus the cross-task matrix.
pub struct SequenceOutcome {
    pub stages: Vec<StageOutcome>,
    pub matrix: Vec<MatrixRow>,
}

impl SequenceOutcome {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.stages.iter().flat_map(|s| s.rows.iter().cloned()).collect()
    }

    pub fn halt(&self) -> Option<&Error> {
        self.stages.iter().find_map(|s| s.halt.as_ref())
    }

    /// Matrix cell evaluated after training `pretrain_task`.
    pub fn cell(&self, pretrain_task: usize, eval_task: usize) -> Option<&EvalSummary> {
        self.matrix
            .iter()
            .find(|r| r.pretrain_task == pretrain_task && r.eval_task == eval_task)
            .map(|r| &r.summary)
    }
}

/// Trains tasks in order, switching with [`Learner::next_task`]. After each
/// stage every task seen so far is evaluated on its own map, giving one
/// matrix row per (stage, task) pair.
pub fn run_transfer_sequence(
    learner: &mut dyn Learner,
    tasks: &[(MazeMap, TrainSchedule)],
    opts: &RunOptions,
) -> Result<SequenceOutcome> {
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("a task sequence needs at least one task".into()));
    }
    let mut stages: Vec<StageOutcome> = Vec::with_capacity(tasks.len());
    let mut matrix = Vec::new();
    let mut switch_rng = rng_for(opts.seed, 400);
    for (k, (map, schedule)) in tasks.iter().enumerate() {
        if k > 0 {
            let prev = stages.last().expect("previous stage");
            learner.next_task(&prev.replay, &tasks[k - 1].1, &mut switch_rng)?;
        }
        let prior: Vec<MetricsRow> = stages.iter().flat_map(|s| s.rows.iter().cloned()).collect();
        let stage = run_training(learner, map, schedule, opts, &prior)?;
        let halted = stage.halt.is_some();
        stages.push(stage);
        if halted {
            break;
        }
        for (i, (old_map, _)) in tasks.iter().enumerate().take(k + 1) {
            let summary = evaluate_learner(
                learner,
                i,
                old_map,
                opts.env,
                opts.matrix_episodes,
                stream(opts.seed, 500 + i as u64),
            )?;
            matrix.push(MatrixRow {
                pretrain_task: k,
                eval_task: i,
                summary,
            });
        }
        if let Some(dir) = &opts.output_dir {
            write_atomic(&dir.join(MATRIX_FILE), matrix_csv(&matrix).as_bytes())?;
        }
    }
    Ok(SequenceOutcome { stages, matrix })
}

//! Runs a configured experiment end to end and writes its run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use crate::baselines::{build_imitation_dataset, DqnModel, ImitationModel, TransferMode};
use crate::config::{AgentKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::harness::{
    eval_seed, evaluate, matrix_csv, metrics_csv, run_transfer_sequence, write_atomic, DqnLearner, EvalSummary,
    Learner, MatrixRow, MetricsRow, OraclePolicy, RandomPolicy, RunOptions, SfLearner, CHECKPOINT_FILE, MATRIX_FILE,
    METRICS_FILE,
};
use crate::maze::{Action, MazeMap, Planner};
use crate::nn::{Adam, AdamConfig};
use crate::rng::{rng_for, stream};
use crate::sf::{SfConfig, SfModel};

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Supervised progress of the imitation learner.
#[derive(Clone, Debug, PartialEq)]
pub struct ImitationReport {
    /// `(updates, held-out accuracy)` at every check.
    pub curve: Vec<(u64, f64)>,
    /// First check at which held-out accuracy reached the target.
    pub updates_to_target: Option<u64>,
    pub final_accuracy: f64,
}

pub const IMITATION_TARGET_ACCURACY: f64 = 0.95;

/// What an experiment produced.
pub struct RunReport {
    pub rows: Vec<MetricsRow>,
    pub matrix: Vec<MatrixRow>,
    /// Per task: step of convergence, env steps used, updates made.
    pub stages: Vec<StageSummary>,
    pub imitation: Option<ImitationReport>,
    pub halt: Option<Error>,
    pub summary: String,
    pub run_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageSummary {
    pub task: usize,
    pub map: String,
    pub converged_at: Option<u64>,
    pub env_steps: u64,
    pub updates: u64,
}

/// Builds the learner an RL agent kind trains with.
pub fn build_learner(cfg: &ExperimentConfig) -> Result<Box<dyn Learner>> {
    let mut rng = rng_for(cfg.seed, 1);
    let lr = cfg.schedule.learning_rate;
    let n_actions = Action::COUNT;
    Ok(match cfg.agent {
        AgentKind::Sf => {
            let sf = SfConfig {
                gamma: cfg.schedule.gamma,
                ..cfg.sf.clone()
            };
            let model = SfModel::new(cfg.env.state_dim(), n_actions, sf, &mut rng);
            Box::new(SfLearner::new(model, lr, cfg.copy_init))
        }
        AgentKind::Dqn | AgentKind::DqnFinetune | AgentKind::DqnFixFeature => {
            let model = DqnModel::new(&cfg.encoder_dims(), cfg.q_hidden, n_actions, &mut rng);
            let mode = match cfg.agent {
                AgentKind::DqnFinetune => Some(TransferMode::Finetune),
                AgentKind::DqnFixFeature => Some(TransferMode::FixFeature),
                _ => None,
            };
            Box::new(DqnLearner::new(model, lr, mode))
        }
        other => {
            return Err(Error::InvalidArgument(format!("{other} is not a reinforcement learner")));
        }
    })
}

fn run_options(cfg: &ExperimentConfig, dir: Option<&Path>) -> RunOptions {
    RunOptions {
        seed: cfg.seed,
        env: cfg.env,
        matrix_episodes: cfg.matrix_episodes,
        output_dir: dir.map(Path::to_path_buf),
        record_wall_clock: cfg.record_wall_clock,
    }
}

/// Runs the experiment. With `dir`, the resolved config, metrics, checkpoint
/// and a summary are written there (created if needed).
pub fn run_experiment(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<RunReport> {
    let maps = cfg.validate()?;
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| Error::file(d, e))?;
        write_atomic(&d.join(RESOLVED_CONFIG_FILE), cfg.to_resolved_string().as_bytes())?;
    }
    let mut report = match cfg.agent {
        AgentKind::Sf | AgentKind::Dqn | AgentKind::DqnFinetune | AgentKind::DqnFixFeature => {
            run_rl(cfg, &maps, dir)?
        }
        AgentKind::Imitation => run_imitation(cfg, &maps[0], dir)?,
        AgentKind::AStarOracle | AgentKind::Random => run_fixed_policy(cfg, &maps, dir)?,
    };
    report.summary = render_summary(cfg, &report);
    if let Some(d) = dir {
        write_atomic(&d.join(SUMMARY_FILE), report.summary.as_bytes())?;
    }
    report.run_dir = dir.map(Path::to_path_buf);
    Ok(report)
}

fn run_rl(cfg: &ExperimentConfig, maps: &[MazeMap], dir: Option<&Path>) -> Result<RunReport> {
    let mut learner = build_learner(cfg)?;
    let tasks: Vec<(MazeMap, _)> = maps
        .iter()
        .enumerate()
        .map(|(k, m)| (m.clone(), cfg.schedule_for(k)))
        .collect();
    let opts = run_options(cfg, dir);
    let seq = run_transfer_sequence(learner.as_mut(), &tasks, &opts)?;
    let stages = seq
        .stages
        .iter()
        .map(|s| StageSummary {
            task: s.task,
            map: cfg.maps[s.task].clone(),
            converged_at: s.converged_at,
            env_steps: s.env_steps,
            updates: s.updates,
        })
        .collect();
    let rows = seq.rows();
    let matrix = seq.matrix.clone();
    let halt = seq.stages.into_iter().find_map(|s| s.halt);
    Ok(RunReport {
        rows,
        matrix,
        stages,
        imitation: None,
        halt,
        summary: String::new(),
        run_dir: None,
    })
}

fn run_fixed_policy(cfg: &ExperimentConfig, maps: &[MazeMap], dir: Option<&Path>) -> Result<RunReport> {
    let mut matrix = Vec::new();
    for (i, map) in maps.iter().enumerate() {
        let seed = stream(cfg.seed, 500 + i as u64);
        let summary = match cfg.agent {
            AgentKind::AStarOracle => {
                evaluate(&mut OraclePolicy(Planner::new(map.clone())), map, cfg.env, cfg.matrix_episodes, seed)?
            }
            _ => evaluate(
                &mut RandomPolicy(rng_for(cfg.seed, 600 + i as u64)),
                map,
                cfg.env,
                cfg.matrix_episodes,
                seed,
            )?,
        };
        matrix.push(MatrixRow {
            pretrain_task: i,
            eval_task: i,
            summary,
        });
    }
    if let Some(d) = dir {
        write_atomic(&d.join(METRICS_FILE), metrics_csv(&[]).as_bytes())?;
        write_atomic(&d.join(MATRIX_FILE), matrix_csv(&matrix).as_bytes())?;
    }
    let stages = cfg
        .maps
        .iter()
        .enumerate()
        .map(|(task, m)| StageSummary {
            task,
            map: m.clone(),
            converged_at: None,
            env_steps: 0,
            updates: 0,
        })
        .collect();
    Ok(RunReport {
        rows: Vec::new(),
        matrix,
        stages,
        imitation: None,
        halt: None,
        summary: String::new(),
        run_dir: None,
    })
}

/// Trains the imitation learner with periodic held-out accuracy checks.
/// Returns the model and its accuracy curve.
pub fn train_imitation(
    cfg: &ExperimentConfig,
    map: &MazeMap,
    mut on_check: impl FnMut(u64, f64, &ImitationModel<f32>) -> Result<()>,
) -> Result<(ImitationModel<f32>, ImitationReport)> {
    let mut data_rng = rng_for(cfg.seed, 700);
    let ds = build_imitation_dataset(map, cfg.env, cfg.imitation_samples, &mut data_rng)?;
    let (train, test) = ds.split(0.8);
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("imitation dataset too small to split".into()));
    }
    let mut rng = rng_for(cfg.seed, 1);
    let mut model = ImitationModel::<f32>::new(&cfg.encoder_dims(), Action::COUNT, &mut rng);
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.schedule.learning_rate));
    let mut batch_rng = rng_for(cfg.seed, 701);
    let every = cfg.imitation_eval_every.max(1);
    let mut curve = Vec::new();
    let mut reached = None;
    let mut streak = 0;
    for u in 1..=cfg.imitation_updates {
        let idx: Vec<usize> = (0..cfg.schedule.batch_size)
            .map(|_| train[batch_rng.gen_range(0..train.len())])
            .collect();
        let (x, y) = ds.gather::<f32>(&idx);
        let loss = model.imitation_loss(&x, &y)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                param: "loss_imitation".into(),
                step: u,
            });
        }
        opt.step(model.params_mut())?;
        if u % every == 0 {
            let acc = model.accuracy(&ds, &test)?;
            curve.push((u, acc));
            on_check(u, acc, &model)?;
            if acc >= IMITATION_TARGET_ACCURACY {
                reached.get_or_insert(u);
                streak += 1;
                if cfg.schedule.stop_on_convergence && streak >= 2 {
                    break;
                }
            } else {
                streak = 0;
            }
        }
    }
    let final_accuracy = model.accuracy(&ds, &test)?;
    Ok((
        model,
        ImitationReport {
            curve,
            updates_to_target: reached,
            final_accuracy,
        },
    ))
}

fn run_imitation(cfg: &ExperimentConfig, map: &MazeMap, dir: Option<&Path>) -> Result<RunReport> {
    let mut rows = Vec::new();
    let started = Instant::now();
    let scale = cfg.schedule.update_every;
    let (model, report) = train_imitation(cfg, map, |u, _acc, model| {
        let mut policy = |s: &crate::maze::StackedState, _| model.greedy_action(s);
        let summary = evaluate(
            &mut policy,
            map,
            cfg.env,
            cfg.schedule.eval_episodes,
            eval_seed(cfg.seed, 0, u),
        )?;
        rows.push(MetricsRow {
            step: cfg.schedule.warmup_steps + u * scale,
            task_id: 0,
            mean_reward: summary.mean_reward,
            std_reward: summary.std_reward,
            success_ratio: summary.success_ratio(),
            mean_steps: summary.mean_steps,
            loss_sf: None,
            loss_phi: None,
            loss_q: None,
            epsilon: 0.0,
            wall_ms: cfg
                .record_wall_clock
                .then(|| started.elapsed().as_secs_f64() * 1e3),
        });
        if let Some(d) = dir {
            write_atomic(&d.join(METRICS_FILE), metrics_csv(&rows).as_bytes())?;
        }
        Ok(())
    })?;
    if let Some(d) = dir {
        write_atomic(&d.join(METRICS_FILE), metrics_csv(&rows).as_bytes())?;
        model.save(&d.join(CHECKPOINT_FILE), cfg.env.history, cfg.env.sensor.rays)?;
    }
    let updates = report.curve.last().map_or(0, |c| c.0);
    Ok(RunReport {
        rows,
        matrix: Vec::new(),
        stages: vec![StageSummary {
            task: 0,
            map: cfg.maps[0].clone(),
            converged_at: report.updates_to_target.map(|u| cfg.schedule.warmup_steps + u * scale),
            env_steps: 0,
            updates,
        }],
        imitation: Some(report),
        halt: None,
        summary: String::new(),
        run_dir: None,
    })
}

fn fmt_summary_row(s: &EvalSummary) -> String {
    format!(
        "{}/{}  reward {:.3} ± {:.3}  steps {:.3} ± {:.3}",
        s.successes, s.episodes, s.mean_reward, s.std_reward, s.mean_steps, s.std_steps
    )
}

fn render_summary(cfg: &ExperimentConfig, r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "agent: {}", cfg.agent);
    let _ = writeln!(out, "maps: {}", cfg.maps.join(" -> "));
    let _ = writeln!(out, "seed: {}", cfg.seed);
    for s in &r.stages {
        let conv = s
            .converged_at
            .map_or_else(|| "not reached".to_string(), |c| c.to_string());
        let _ = writeln!(
            out,
            "task {} ({}): steps to 0.9 success {}, env steps {}, updates {}",
            s.task, s.map, conv, s.env_steps, s.updates
        );
    }
    if let Some(im) = &r.imitation {
        let _ = writeln!(
            out,
            "held-out accuracy {:.4}; updates to {:.0}%: {}",
            im.final_accuracy,
            IMITATION_TARGET_ACCURACY * 100.0,
            im.updates_to_target.map_or_else(|| "not reached".into(), |u| u.to_string())
        );
    }
    if !r.matrix.is_empty() {
        let _ = writeln!(out, "evaluation (trained through task / evaluated task):");
        for m in &r.matrix {
            let _ = writeln!(
                out,
                "  {} / {}: {}",
                cfg.maps[m.pretrain_task],
                cfg.maps[m.eval_task],
                fmt_summary_row(&m.summary)
            );
        }
    }
    if let Some(h) = &r.halt {
        let _ = writeln!(out, "HALTED: {h}");
    }
    out
}

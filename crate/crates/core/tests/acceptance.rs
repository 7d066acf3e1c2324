//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod support;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfrl::config::{preset, ExperimentConfig};
use sfrl::experiment::{run_experiment, RunReport};
use sfrl::harness::{
    evaluate, run_training, MatrixRow, OraclePolicy, RunOptions, SfLearner, CONVERGENCE_SUCCESS,
};
use sfrl::maze::{builtin, optimal_return, random_start, Action, EnvConfig, Heading, MazeEnv, MazeMap, Planner, Pose, StackedState};
use sfrl::nn::Tensor;
use sfrl::rng::rng_for;
use sfrl::sf::{OldTaskReadout, PoseProbeConfig, SfConfig, SfModel};
use sfrl::verify::gradient_suite;

const SEEDS: [u64; 3] = [0, 1, 2];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn report(n: usize, name: &str, v: &Verdict, secs: f64) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "{} {n:>2} {name}: {} [{secs:.0}s]",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
}

fn run_preset(name: &str, seed: u64, overrides: &[&str], dir: &Path) -> RunReport {
    let mut cfg: ExperimentConfig = preset(name).expect("bundled preset");
    cfg.seed = seed;
    for kv in overrides {
        cfg.apply_override(kv).expect("valid override");
    }
    let out = dir.join(format!("{name}-seed{seed}"));
    let r = run_experiment(&cfg, Some(&out)).expect("run completes");
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "     ran {name} seed {seed}: {}", r.summary.lines().filter(|l| l.starts_with("task")).collect::<Vec<_>>().join("; "));
    r
}

fn cell(r: &RunReport, k: usize, i: usize) -> Option<&MatrixRow> {
    r.matrix.iter().find(|m| m.pretrain_task == k && m.eval_task == i)
}

fn successes(r: &RunReport, k: usize, i: usize) -> usize {
    cell(r, k, i).map_or(0, |m| m.summary.successes)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn reward_identity() -> Verdict {
    let env = EnvConfig {
        max_steps: 500,
        ..EnvConfig::default()
    };
    let mut worst = 0.0f64;
    for name in ["map1", "map2", "map3", "map4"] {
        let map = builtin(name).unwrap();
        let s = evaluate(&mut OraclePolicy(Planner::new(map.clone())), &map, env, 50, 0).unwrap();
        worst = worst.max((s.mean_reward - optimal_return(s.mean_steps)).abs());
        worst = worst.max(f64::from(u8::from(s.successes != 50)));
    }
    let table = (optimal_return(5.640) - 0.814).abs() < 5e-4 && (optimal_return(10.120) - 0.635).abs() < 5e-4;
    verdict(
        worst <= 1e-6 && table,
        format!("max |reward - (1 - 0.04(steps - 1))| = {worst:.1e}; reference rows reproduced: {table}"),
    )
}

fn gradients() -> Verdict {
    let entries = gradient_suite(20, 0).unwrap();
    let worst = entries
        .iter()
        .max_by(|a, b| (a.max_rel_err / a.tolerance).total_cmp(&(b.max_rel_err / b.tolerance)))
        .unwrap();
    let failed: Vec<&str> = entries.iter().filter(|e| !e.pass).map(|e| e.name).collect();
    verdict(
        failed.is_empty() && entries.iter().all(|e| e.instances >= 20),
        format!(
            "{} checks x 20 instances; worst {} at {:.1e} (tol {:.0e}); failed {:?}",
            entries.len(),
            worst.name,
            worst.max_rel_err,
            worst.tolerance,
            failed
        ),
    )
}

fn tabular() -> Verdict {
    let (psi, q) = support::tabular_sf_errors();
    verdict(psi <= 1e-3 && q <= 1e-3, format!("max successor error {psi:.1e}, max Q error {q:.1e}"))
}

fn planner() -> Verdict {
    let (bad, checked) = support::planner_mismatches(20, 0);
    verdict(bad == 0, format!("{bad} mismatches over {checked} start poses on 20 random 9x9 maps"))
}

/// Updates an RL agent had performed when it first met the convergence rule.
fn updates_at(cfg: &ExperimentConfig, step: u64) -> u64 {
    let s = &cfg.schedule;
    (step.saturating_sub(s.warmup_steps)) / s.update_every
}

fn from_scratch(sf: &RunReport, dqn: &RunReport, imitation: &RunReport) -> Verdict {
    let cfg = preset("scratch-map1").unwrap();
    let budget = cfg.schedule.total_steps;
    let sf_at = sf.stages[0].converged_at;
    let dqn_at = dqn.stages[0].converged_at;
    let im = imitation.imitation.as_ref().expect("imitation report");
    let rl_updates: Vec<u64> = [sf_at, dqn_at].iter().flatten().map(|&s| updates_at(&cfg, s)).collect();
    let im_ok = match (im.updates_to_target, rl_updates.iter().min()) {
        (Some(u), Some(&m)) => rl_updates.len() == 2 && u < m,
        _ => false,
    };
    verdict(
        sf_at.is_some_and(|s| s <= budget) && dqn_at.is_some_and(|s| s <= budget) && im_ok,
        format!(
            "steps to {CONVERGENCE_SUCCESS}: SF {sf_at:?}, DQN {dqn_at:?} (budget {budget}); RL updates {rl_updates:?}; \
             imitation updates to 95% {:?} (final accuracy {:.3})",
            im.updates_to_target, im.final_accuracy
        ),
    )
}

fn transfer_speedup(transfer: &[RunReport], scratch: &[RunReport]) -> Verdict {
    let budget = preset("scratch-map2").unwrap().schedule.total_steps as f64;
    // A run that never converges is counted at the budget for scratch and as
    // never for transfer.
    let t: Vec<f64> = transfer
        .iter()
        .map(|r| r.stages[1].converged_at.map_or(f64::INFINITY, |s| s as f64))
        .collect();
    let s: Vec<f64> = scratch
        .iter()
        .map(|r| r.stages[0].converged_at.map_or(budget, |s| s as f64))
        .collect();
    let (mt, ms) = (median(t.clone()), median(s.clone()));
    verdict(
        mt <= 0.5 * ms,
        format!("steps to {CONVERGENCE_SUCCESS} on map2: transfer {t:?} (median {mt}), scratch {s:?} (median {ms}); ratio {:.2}", mt / ms),
    )
}

fn preservation(transfer12: &RunReport, sf34: &RunReport, dqn34: &RunReport) -> Verdict {
    let old12 = successes(transfer12, 1, 0);
    let sf_old = successes(sf34, 1, 0);
    let dqn_pre = successes(dqn34, 0, 0);
    let dqn_old = successes(dqn34, 1, 0);
    verdict(
        old12 >= 45 && sf_old >= 45 && dqn_old < sf_old && dqn_old < dqn_pre,
        format!(
            "old task after map1->map2: SF {old12}/50; after map3->map4: SF {sf_old}/50, DQN-finetune {dqn_old}/50 \
             (before transfer {dqn_pre}/50)"
        ),
    )
}

/// Stacked states on `map`: the episode-start state of every pose plus every
/// state met while following the planner from it.
fn all_states(map: &MazeMap, env_cfg: EnvConfig) -> Vec<StackedState> {
    let cfg = EnvConfig {
        slip_prob: 0.0,
        ..env_cfg
    };
    let mut env = MazeEnv::new(map.clone(), cfg, 0);
    let mut planner = Planner::new(map.clone());
    let mut out = Vec::new();
    for (x, y) in map.free_cells() {
        for h in Heading::ALL {
            let (mut s, mut pose) = env.reset_to(Pose::new(x, y, h));
            loop {
                out.push(s.clone());
                let a = planner.optimal_action(pose).unwrap();
                if a == Action::Stand {
                    break;
                }
                let r = env.step(a);
                if r.terminal || r.truncated {
                    break;
                }
                s = r.state;
                pose = r.pose;
            }
        }
    }
    out
}

fn switch_exactness() -> Verdict {
    let cfg = preset("scratch-map1").unwrap();
    let map = builtin("map1").unwrap();
    let mut rng = rng_for(0, 1);
    let model = SfModel::<f32>::new(cfg.env.state_dim(), 4, cfg.sf.clone(), &mut rng);
    let mut learner = SfLearner::new(model, cfg.schedule.learning_rate, true);
    let schedule = sfrl::harness::TrainSchedule {
        total_steps: 10_000,
        ..cfg.schedule.clone()
    };
    let opts = RunOptions {
        env: cfg.env,
        matrix_episodes: 1,
        ..RunOptions::default()
    };
    run_training(&mut learner, &map, &schedule, &opts, &[]).unwrap();
    let states = all_states(&map, cfg.env);
    let x = Tensor::new(
        vec![states.len(), cfg.env.state_dim()],
        states.iter().flat_map(|s| s.as_slice().to_vec()).collect(),
    )
    .unwrap();

    let mut lines = Vec::new();
    let mut ok = true;
    for readout in [OldTaskReadout::MappedInput, OldTaskReadout::MappedOutput] {
        for copy in [true, false] {
            let mut m = learner.model.clone();
            m.config_mut().readout = readout;
            let before_q = m.q_values(0, &x).unwrap();
            let before_a: Vec<Action> = states.iter().map(|s| m.greedy_action(0, s).unwrap()).collect();
            m.add_task(copy, &mut ChaCha8Rng::seed_from_u64(9));
            let after_q = m.q_values(0, &x).unwrap();
            let after_a: Vec<Action> = states.iter().map(|s| m.greedy_action(0, s).unwrap()).collect();
            let changed = before_a.iter().zip(&after_a).filter(|(a, b)| a != b).count();
            let max_dq = before_q
                .data()
                .iter()
                .zip(after_q.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            ok &= changed == 0 && max_dq == 0.0;
            lines.push(format!("{readout:?}/copy={copy}: {changed} changed, max |dQ| {max_dq:e}"));
        }
    }
    verdict(ok, format!("{} states; {}", states.len(), lines.join("; ")))
}

fn determinism(dir: &Path) -> Verdict {
    let overrides = ["total_steps=6000", "eval_every=2000", "eval_episodes=10", "matrix_episodes=10"];
    let mut texts = Vec::new();
    for run in ["a", "b"] {
        let d = dir.join(format!("determinism-{run}"));
        std::fs::create_dir_all(&d).unwrap();
        run_preset("transfer-map1-map2", 4, &overrides, &d);
        let base = d.join("transfer-map1-map2-seed4");
        texts.push((
            std::fs::read(base.join("metrics.csv")).unwrap(),
            std::fs::read(base.join("cross_task.csv")).unwrap(),
        ));
    }
    let same = texts[0] == texts[1];
    verdict(
        same && !texts[0].0.is_empty(),
        format!("transfer-map1-map2 re-run with seed 4: metrics and matrix bit-identical = {same}"),
    )
}

/// States and true poses along uniformly random walks on `map`.
fn random_walk_states(map: &MazeMap, env_cfg: EnvConfig, n: usize, seed: u64) -> (Tensor<f32>, Vec<Pose>) {
    let mut env = MazeEnv::new(map.clone(), env_cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s, mut pose) = env.reset_to(random_start(map, &mut rng));
    let mut data = Vec::with_capacity(n * env_cfg.state_dim());
    let mut poses = Vec::with_capacity(n);
    while poses.len() < n {
        data.extend_from_slice(s.as_slice());
        poses.push(pose);
        let r = env.step(Action::from_index(rng.gen_range(0..Action::COUNT)).unwrap());
        if r.terminal || r.truncated {
            (s, pose) = env.reset_to(random_start(map, &mut rng));
        } else {
            (s, pose) = (r.state, r.pose);
        }
    }
    (Tensor::new(vec![n, env_cfg.state_dim()], data).unwrap(), poses)
}

fn pose_regression(scratch: &[RunReport]) -> Verdict {
    let cfg = preset("scratch-map2").unwrap();
    let map = builtin("map2").unwrap();
    let probe = PoseProbeConfig::default();
    let mut pairs = Vec::new();
    for (r, &seed) in scratch.iter().zip(&SEEDS) {
        let dir = r.run_dir.as_ref().expect("run directory");
        let (trained, _) = SfModel::<f32>::load(&dir.join("checkpoint.bin"), cfg.sf.clone()).unwrap();
        let untrained = SfModel::<f32>::new(cfg.env.state_dim(), 4, SfConfig { gamma: cfg.schedule.gamma, ..cfg.sf.clone() }, &mut rng_for(seed, 1));
        let (x, poses) = random_walk_states(&map, cfg.env, 3000, 50 + seed);
        let fit = |m: &SfModel<f32>| {
            m.regress_pose(&x, &poses, map.width(), map.height(), &probe, &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
        };
        pairs.push((fit(&trained), fit(&untrained)));
    }
    let ok = pairs.iter().all(|(t, u)| t.mean_position_error < u.mean_position_error);
    let mut detail = String::from("held-out position error trained vs untrained:");
    for (t, u) in &pairs {
        let _ = write!(
            detail,
            " {:.3} vs {:.3} (heading {:.2} vs {:.2});",
            t.mean_position_error, u.mean_position_error, t.heading_accuracy, u.heading_accuracy
        );
    }
    verdict(ok, detail)
}

fn main() {
    let all = Instant::now();
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    let stop = ["stop_on_convergence=true"];
    let mut verdicts = Vec::new();
    let mut record = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        report(n, name, &v, t.elapsed().as_secs_f64());
        verdicts.push(v.pass);
    };

    record(1, "oracle reward identity", &mut reward_identity);
    record(2, "gradient suite", &mut gradients);
    record(3, "tabular successor features", &mut tabular);
    record(4, "planner against breadth-first search", &mut planner);
    record(8, "old-task actions unchanged at task switch", &mut switch_exactness);
    record(9, "same seed, identical metrics", &mut || determinism(dir));

    record(5, "learning from scratch on map1", &mut || {
        let sf = run_preset("scratch-map1", 0, &stop, dir);
        let dqn = run_preset("dqn-scratch-map1", 0, &stop, dir);
        let im = run_preset("imitation-map1", 0, &[], dir);
        from_scratch(&sf, &dqn, &im)
    });

    let mut transfer = Vec::new();
    let mut scratch = Vec::new();
    record(6, "transfer speedup on map2", &mut || {
        for seed in SEEDS {
            transfer.push(run_preset("transfer-map1-map2", seed, &stop, dir));
            scratch.push(run_preset("scratch-map2", seed, &stop, dir));
        }
        transfer_speedup(&transfer, &scratch)
    });

    record(7, "old-task preservation", &mut || {
        let sf34 = run_preset("transfer-map3-map4", 0, &stop, dir);
        let dqn34 = run_preset("dqn-finetune-map3-map4", 0, &stop, dir);
        preservation(&transfer[0], &sf34, &dqn34)
    });

    record(10, "pose regression from learned features", &mut || pose_regression(&scratch));

    let failed = verdicts.iter().filter(|p| !**p).count();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "acceptance: {} passed, {failed} failed in {:.0}s",
        verdicts.len() - failed,
        all.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

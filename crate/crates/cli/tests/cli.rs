use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
agent = sf
maps = map1
total_steps = 600
warmup_steps = 200
eval_every = 300
eval_episodes = 3
matrix_episodes = 3
batch_size = 8
phi_dim = 8
encoder_hidden = 16
decoder_hidden = 16
psi_hidden = 16
q_hidden = 16
output_dir = tiny
seed = 3
";

fn sfrl(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfrl"))
        .args(args)
        .env("SFRL_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn train_writes_artifacts_and_seed_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = sfrl(tmp.path(), &["train", "--config", &cfg, "--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("tiny");
    for f in ["metrics.csv", "checkpoint.bin", "summary.txt", "config.resolved", "cross_task.csv"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let resolved = fs::read_to_string(run.join("config.resolved")).unwrap();
    assert!(resolved.lines().any(|l| l == "seed = 7"));
}

#[test]
fn transfer_config_emits_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &TINY.replace("maps = map1", "maps = map1,map2"));
    let o = sfrl(tmp.path(), &["train", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = fs::read_to_string(tmp.path().join("tiny/cross_task.csv")).unwrap();
    let cells: Vec<&str> = m.lines().skip(1).map(|l| &l[..3]).collect();
    assert_eq!(cells, vec!["0,0", "1,0", "1,1"]);
}

#[test]
fn config_errors_exit_one_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "agent = sf\nbogus_key = 1\n");
    let o = sfrl(tmp.path(), &["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = sfrl(tmp.path(), &["train", "--preset", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(1));
    let o = sfrl(tmp.path(), &["train", "--config", &cfg.replace("exp", "missing")]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn divergence_exits_two_and_keeps_halt_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{TINY}learning_rate = 1e38\n"));
    let o = sfrl(tmp.path(), &["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("tiny/halt_checkpoint.bin").exists());
}

#[test]
fn eval_is_repeatable_and_checks_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    assert!(sfrl(tmp.path(), &["train", "--config", &cfg]).status.success());
    let ck = tmp.path().join("tiny/checkpoint.bin");
    let ck = ck.to_str().unwrap();
    let args = ["eval", "--checkpoint", ck, "--map", "map1", "--episodes", "5", "--seed", "4"];
    let a = sfrl(tmp.path(), &args);
    let b = sfrl(tmp.path(), &args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("success "));

    let o = sfrl(tmp.path(), &["eval", "--checkpoint", ck, "--map", "map1", "--set", "history=2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("observations"));
}

#[test]
fn oracle_eval_row_satisfies_reward_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("rows.csv");
    for map in ["map1", "map2"] {
        let o = sfrl(
            tmp.path(),
            &["eval", "--policy", "astar", "--map", map, "--csv", csv.to_str().unwrap()],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r[2], 50.0);
        assert!((r[4] - (1.0 - 0.04 * (r[6] - 1.0))).abs() < 1e-6);
    }
}

#[test]
fn compare_merges_and_rejects_bad_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let header = "step,task_id,mean_reward,std_reward,success_ratio,mean_steps,loss_sf,loss_phi,loss_q,epsilon,wall_ms";
    for (name, body) in [("a", "10,0,0.5,0.1,0.9,6,,,,0.5,\n20,0,0.6,0.1,0.95,6,,,,0.1,\n"), ("b", "20,0,0.5,0.1,0.9,6,,,,0.5,\n40,0,0.6,0.1,1,6,,,,0.1,\n")] {
        fs::create_dir(tmp.path().join(name)).unwrap();
        fs::write(tmp.path().join(name).join("metrics.csv"), format!("{header}\n{body}")).unwrap();
    }
    let a = tmp.path().join("a/metrics.csv");
    let b = tmp.path().join("b/metrics.csv");
    let out = tmp.path().join("merged.csv");
    let o = sfrl(
        tmp.path(),
        &["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--out", out.to_str().unwrap()],
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("b/task0,20,1,2"));
    let merged = fs::read_to_string(out).unwrap();
    assert_eq!(merged.lines().count(), 4);

    fs::write(&b, "step,reward\n1,2\n").unwrap();
    let o = sfrl(tmp.path(), &["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_and_oracle_commands_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sfrl(tmp.path(), &["gradcheck", "--instances", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 9);

    let o = sfrl(tmp.path(), &["oracle", "--map", "map1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("planner: success 50/50"));

    let o = sfrl(tmp.path(), &["presets"]);
    assert!(stdout(&o).contains("transfer-map1-map2"));
}

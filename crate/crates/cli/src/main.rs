use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sfrl::baselines::{DqnModel, ImitationModel};
use sfrl::config::{preset_text, ExperimentConfig, PRESETS};
use sfrl::harness::{
    evaluate, matrix_csv, write_atomic, EvalSummary, MatrixRow, OraclePolicy, RandomPolicy, CONVERGENCE_SUCCESS,
};
use sfrl::maze::{astar_distance, optimal_return, resolve_map, Heading, MazeMap, Planner, Pose, StackedState};
use sfrl::nn::checkpoint::load_file;
use sfrl::report::{convergence_summary, merge_curves, parse_metrics};
use sfrl::rng::rng_for;
use sfrl::sf::SfModel;
use sfrl::verify::gradient_suite;
use sfrl::{Error, Result};

const OUTPUT_ROOT_VAR: &str = "SFRL_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "sfrl", version, about = "Successor-feature transfer experiments in ray-sensed mazes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a config file or a bundled preset.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or a fixed policy) on a map.
    Eval(EvalArgs),
    /// Merge metrics CSVs into one learning-curve table plus a convergence summary.
    Compare(CompareArgs),
    /// Run the finite-difference gradient verification suite.
    Gradcheck(GradcheckArgs),
    /// Print planner statistics for a map.
    Oracle(OracleArgs),
    /// List bundled presets.
    Presets,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset name (see `sfrl presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "policy")]
    checkpoint: Option<PathBuf>,
    /// Fixed policy instead of a checkpoint: `astar` or `random`.
    #[arg(long, conflicts_with = "checkpoint")]
    policy: Option<String>,
    /// Built-in map name or map file.
    #[arg(long)]
    map: String,
    /// Task whose head to evaluate; defaults to the checkpoint's current task.
    #[arg(long)]
    task: Option<usize>,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Append the row to this CSV (header written if new).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Environment and model settings; must match the checkpoint.
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Write the merged curves here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    map: String,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Halt(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } => Failure::Halt(e.to_string()),
            Error::Config { .. } | Error::MapLoad(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            other => Failure::Halt(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Oracle(a) => oracle(a),
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:28} {about}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Halt(m)) => {
            eprintln!("halted: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(p), _) => ExperimentConfig::from_file(p)?,
        (None, Some(name)) => {
            let text = preset_text(name).ok_or_else(|| Error::InvalidArgument(format!("unknown preset {name:?}")))?;
            ExperimentConfig::parse(&text)?
        }
        (None, None) => ExperimentConfig::default(),
    };
    for kv in &args.overrides {
        cfg.apply_override(kv)?;
    }
    Ok(cfg)
}

fn train(args: TrainArgs) -> Result<(), Failure> {
    if args.cfg.config.is_none() && args.cfg.preset.is_none() {
        return Err(Failure::Usage("train needs --config or --preset".into()));
    }
    let mut cfg = load_config(&args.cfg)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let dir = root.join(&cfg.output_dir);
    let report = sfrl::experiment::run_experiment(&cfg, Some(&dir))?;
    print!("{}", report.summary);
    println!("run directory: {}", dir.display());
    match report.halt {
        Some(e) => Err(Failure::Halt(e.to_string())),
        None => Ok(()),
    }
}

type Greedy = Box<dyn Fn(&StackedState) -> Result<sfrl::maze::Action>>;

/// Loads any checkpoint kind and returns its greedy policy for `task`,
/// the task actually used and the pretraining task recorded in it.
fn load_policy(path: &Path, task: Option<usize>, cfg: &ExperimentConfig) -> Result<(Greedy, usize, usize)> {
    let (header, records) = load_file::<f32>(path)?;
    let expected = cfg.env.state_dim();
    let dims_error = |got: usize| {
        Error::InvalidArgument(format!(
            "checkpoint expects observations of length {got} but the environment produces {expected} \
             (history {} x rays {})",
            cfg.env.history, cfg.env.sensor.rays
        ))
    };
    let current = header.current_task as usize;
    let first = records.names().next().unwrap_or("").to_string();
    if first.starts_with("dqn.") {
        let (m, _) = DqnModel::<f32>::load(path)?;
        if m.input_dim() != expected {
            return Err(dims_error(m.input_dim()));
        }
        Ok((Box::new(move |s| m.greedy_action(s)), current, current))
    } else if first.starts_with("imit.") {
        let (m, _) = ImitationModel::<f32>::load(path)?;
        if m.encoder.in_dim() != expected {
            return Err(dims_error(m.encoder.in_dim()));
        }
        Ok((Box::new(move |s| m.greedy_action(s)), current, current))
    } else {
        let (m, _) = SfModel::<f32>::load(path, cfg.sf.clone())?;
        if m.input_dim() != expected {
            return Err(dims_error(m.input_dim()));
        }
        let t = task.unwrap_or(current);
        if t >= m.task_count() {
            return Err(Error::InvalidArgument(format!(
                "task {t} out of range; checkpoint has {} tasks",
                m.task_count()
            )));
        }
        Ok((Box::new(move |s| m.greedy_action(t, s)), t, current))
    }
}

fn print_row(label: &str, s: &EvalSummary) {
    println!(
        "{label}: success {}/{}, reward {:.4} ± {:.4}, steps {:.2} ± {:.2}",
        s.successes, s.episodes, s.mean_reward, s.std_reward, s.mean_steps, s.std_steps
    );
}

fn append_row(path: &Path, row: &MatrixRow) -> Result<()> {
    let text = matrix_csv(std::slice::from_ref(row));
    let out = match std::fs::read_to_string(path) {
        Ok(existing) if !existing.is_empty() => {
            let mut e = existing;
            if !e.ends_with('\n') {
                e.push('\n');
            }
            e.push_str(text.lines().nth(1).unwrap_or(""));
            e.push('\n');
            e
        }
        _ => text,
    };
    write_atomic(path, out.as_bytes())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.cfg)?;
    let map = resolve_map(&args.map)?;
    let (summary, pretrain, task) = match (&args.checkpoint, args.policy.as_deref()) {
        (Some(path), _) => {
            let (policy, task, pretrain) = load_policy(path, args.task, &cfg)?;
            let mut act = |s: &StackedState, _| policy(s);
            (evaluate(&mut act, &map, cfg.env, args.episodes, args.seed)?, pretrain, task)
        }
        (None, Some("astar")) => (
            evaluate(&mut OraclePolicy(Planner::new(map.clone())), &map, cfg.env, args.episodes, args.seed)?,
            0,
            0,
        ),
        (None, Some("random")) => (
            evaluate(&mut RandomPolicy(rng_for(args.seed, 600)), &map, cfg.env, args.episodes, args.seed)?,
            0,
            0,
        ),
        (None, p) => {
            return Err(Failure::Usage(format!(
                "--policy must be astar or random, got {:?}",
                p.unwrap_or("")
            )))
        }
    };
    print_row(map.name(), &summary);
    let row = MatrixRow {
        pretrain_task: pretrain,
        eval_task: task,
        summary,
    };
    print!("{}", matrix_csv(std::slice::from_ref(&row)));
    if let Some(p) = &args.csv {
        append_row(p, &row)?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), Failure> {
    let mut series = Vec::new();
    for f in &args.files {
        let text = std::fs::read_to_string(f).map_err(|e| Failure::Usage(format!("{}: {e}", f.display())))?;
        let run = f
            .parent()
            .and_then(Path::file_name)
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| f.display().to_string());
        series.extend(parse_metrics(&run, &text)?);
    }
    let merged = merge_curves(&series);
    match &args.out {
        Some(p) => write_atomic(p, merged.as_bytes())?,
        None => print!("{merged}"),
    }
    println!("# steps to {CONVERGENCE_SUCCESS} success");
    print!("{}", convergence_summary(&series));
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<(), Failure> {
    let entries = gradient_suite(args.instances, args.seed)?;
    let mut ok = true;
    for e in &entries {
        println!(
            "{} {:45} instances {:3}  max rel err {:.3e}  (tol {:.0e})",
            if e.pass { "PASS" } else { "FAIL" },
            e.name,
            e.instances,
            e.max_rel_err,
            e.tolerance
        );
        ok &= e.pass;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Halt("gradient check failed".into()))
    }
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    let map: MazeMap = resolve_map(&args.map)?;
    let mut lengths = Vec::new();
    for (x, y) in map.free_cells() {
        if (x, y) == map.goal() {
            continue;
        }
        for h in Heading::ALL {
            lengths.push(astar_distance(&map, Pose::new(x, y, h))? as f64);
        }
    }
    let n = lengths.len().max(1) as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let max = lengths.iter().copied().fold(0.0, f64::max);
    println!("map {} ({}x{})", map.name(), map.width(), map.height());
    println!("free cells {}, start poses {}", map.free_cells().len(), lengths.len());
    println!("shortest path length: mean {mean:.2}, max {max}");
    println!("optimal return at mean length: {:.4}", optimal_return(mean));
    let mut env = ExperimentConfig::default().env;
    env.max_steps = env.max_steps.max(max as usize + 1);
    let summary = evaluate(
        &mut OraclePolicy(Planner::new(map.clone())),
        &map,
        env,
        args.episodes,
        args.seed,
    )?;
    print_row("planner", &summary);
    Ok(())
}

//! Experiment configuration: a line-oriented `key = value` format with `#`
//! comments, command-line overrides and bundled presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::TrainSchedule;
use crate::maze::{resolve_map, EnvConfig, MazeMap, SensorConfig};
use crate::sf::{OldTaskReadout, SfConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Sf,
    Dqn,
    DqnFinetune,
    DqnFixFeature,
    Imitation,
    AStarOracle,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 7] = [
        AgentKind::Sf,
        AgentKind::Dqn,
        AgentKind::DqnFinetune,
        AgentKind::DqnFixFeature,
        AgentKind::Imitation,
        AgentKind::AStarOracle,
        AgentKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Sf => "sf",
            AgentKind::Dqn => "dqn",
            AgentKind::DqnFinetune => "dqn-finetune",
            AgentKind::DqnFixFeature => "dqn-fixfeature",
            AgentKind::Imitation => "imitation",
            AgentKind::AStarOracle => "astar",
            AgentKind::Random => "random",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = AgentKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown agent {s:?} (expected one of {})", names.join(", "))
            })
    }
}

fn readout_name(r: OldTaskReadout) -> &'static str {
    match r {
        OldTaskReadout::MappedInput => "mapped-input",
        OldTaskReadout::MappedOutput => "mapped-output",
    }
}

fn parse_readout(s: &str) -> std::result::Result<OldTaskReadout, String> {
    match s {
        "mapped-input" => Ok(OldTaskReadout::MappedInput),
        "mapped-output" => Ok(OldTaskReadout::MappedOutput),
        _ => Err(format!("unknown readout {s:?} (expected mapped-input or mapped-output)")),
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    /// Built-in map names or map file paths, trained in order.
    pub maps: Vec<String>,
    pub schedule: TrainSchedule,
    /// Stop each task except the last once it has converged.
    pub pretrain_stop_on_convergence: bool,
    pub env: EnvConfig,
    pub sf: SfConfig,
    pub q_hidden: usize,
    pub copy_init: bool,
    pub imitation_samples: usize,
    pub imitation_updates: u64,
    pub imitation_eval_every: u64,
    pub matrix_episodes: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub record_wall_clock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            agent: AgentKind::Sf,
            maps: vec!["map1".into()],
            schedule: TrainSchedule::default(),
            pretrain_stop_on_convergence: false,
            env: EnvConfig::default(),
            sf: SfConfig::default(),
            q_hidden: 256,
            copy_init: true,
            imitation_samples: 20_000,
            imitation_updates: 20_000,
            imitation_eval_every: 500,
            matrix_episodes: 50,
            seed: 0,
            output_dir: PathBuf::from("run"),
            record_wall_clock: false,
        }
    }
}

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("expected a {} but got {v:?}", std::any::type_name::<T>()))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false but got {v:?}")),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<usize>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_num(x.trim())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Keys in the order the resolved form lists them.
    pub const KEYS: [&'static str; 40] = [
        "agent",
        "maps",
        "seed",
        "output_dir",
        "record_wall_clock",
        "total_steps",
        "warmup_steps",
        "update_every",
        "target_sync_every",
        "eval_every",
        "eval_episodes",
        "epsilon_start",
        "epsilon_end",
        "epsilon_anneal_steps",
        "gamma",
        "batch_size",
        "learning_rate",
        "buffer_capacity",
        "phi_updates_per_update",
        "retained_states",
        "stop_on_convergence",
        "pretrain_stop_on_convergence",
        "rays",
        "fov",
        "max_range",
        "history",
        "slip_prob",
        "max_steps",
        "phi_dim",
        "encoder_hidden",
        "decoder_hidden",
        "psi_hidden",
        "q_hidden",
        "multitask_sf",
        "readout",
        "copy_init",
        "reward_weight",
        "reconstruction_weight",
        "mapping_weight",
        "matrix_episodes",
    ];

    const EXTRA_KEYS: [&'static str; 3] = ["imitation_samples", "imitation_updates", "imitation_eval_every"];

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let s = &mut self.schedule;
        match key {
            "agent" => self.agent = v.parse()?,
            "maps" => {
                self.maps = v.split(',').map(|m| m.trim().to_string()).filter(|m| !m.is_empty()).collect()
            }
            "seed" => self.seed = parse_num(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "record_wall_clock" => self.record_wall_clock = parse_bool(v)?,
            "total_steps" => s.total_steps = parse_num(v)?,
            "warmup_steps" => s.warmup_steps = parse_num(v)?,
            "update_every" => s.update_every = parse_num(v)?,
            "target_sync_every" => s.target_sync_every = parse_num(v)?,
            "eval_every" => s.eval_every = parse_num(v)?,
            "eval_episodes" => s.eval_episodes = parse_num(v)?,
            "epsilon_start" => s.epsilon_start = parse_num(v)?,
            "epsilon_end" => s.epsilon_end = parse_num(v)?,
            "epsilon_anneal_steps" => s.epsilon_anneal_steps = parse_num(v)?,
            "gamma" => {
                let g: f64 = parse_num(v)?;
                if !(0.0..1.0).contains(&g) {
                    return Err(format!("gamma must be in [0, 1), got {g}"));
                }
                s.gamma = g;
                self.sf.gamma = g;
            }
            "batch_size" => s.batch_size = parse_num(v)?,
            "learning_rate" => s.learning_rate = parse_num(v)?,
            "buffer_capacity" => s.buffer_capacity = parse_num(v)?,
            "phi_updates_per_update" => s.phi_updates_per_update = parse_num(v)?,
            "retained_states" => s.retained_states = parse_num(v)?,
            "stop_on_convergence" => s.stop_on_convergence = parse_bool(v)?,
            "pretrain_stop_on_convergence" => self.pretrain_stop_on_convergence = parse_bool(v)?,
            "rays" => self.env.sensor.rays = parse_num(v)?,
            "fov" => self.env.sensor.fov_degrees = parse_num(v)?,
            "max_range" => self.env.sensor.max_range = parse_num(v)?,
            "history" => self.env.history = parse_num(v)?,
            "slip_prob" => self.env.slip_prob = parse_num(v)?,
            "max_steps" => self.env.max_steps = parse_num(v)?,
            "phi_dim" => self.sf.phi_dim = parse_num(v)?,
            "encoder_hidden" => self.sf.encoder_hidden = parse_list(v)?,
            "decoder_hidden" => self.sf.decoder_hidden = parse_list(v)?,
            "psi_hidden" => self.sf.psi_hidden = parse_num(v)?,
            "q_hidden" => self.q_hidden = parse_num(v)?,
            "multitask_sf" => self.sf.multitask_sf = parse_bool(v)?,
            "readout" => self.sf.readout = parse_readout(v)?,
            "copy_init" => self.copy_init = parse_bool(v)?,
            "reward_weight" => self.sf.reward_weight = parse_num(v)?,
            "reconstruction_weight" => self.sf.reconstruction_weight = parse_num(v)?,
            "mapping_weight" => self.sf.mapping_weight = parse_num(v)?,
            "matrix_episodes" => self.matrix_episodes = parse_num(v)?,
            "imitation_samples" => self.imitation_samples = parse_num(v)?,
            "imitation_updates" => self.imitation_updates = parse_num(v)?,
            "imitation_eval_every" => self.imitation_eval_every = parse_num(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.schedule;
        Some(match key {
            "agent" => self.agent.to_string(),
            "maps" => self.maps.join(","),
            "seed" => self.seed.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "record_wall_clock" => self.record_wall_clock.to_string(),
            "total_steps" => s.total_steps.to_string(),
            "warmup_steps" => s.warmup_steps.to_string(),
            "update_every" => s.update_every.to_string(),
            "target_sync_every" => s.target_sync_every.to_string(),
            "eval_every" => s.eval_every.to_string(),
            "eval_episodes" => s.eval_episodes.to_string(),
            "epsilon_start" => s.epsilon_start.to_string(),
            "epsilon_end" => s.epsilon_end.to_string(),
            "epsilon_anneal_steps" => s.epsilon_anneal_steps.to_string(),
            "gamma" => s.gamma.to_string(),
            "batch_size" => s.batch_size.to_string(),
            "learning_rate" => s.learning_rate.to_string(),
            "buffer_capacity" => s.buffer_capacity.to_string(),
            "phi_updates_per_update" => s.phi_updates_per_update.to_string(),
            "retained_states" => s.retained_states.to_string(),
            "stop_on_convergence" => s.stop_on_convergence.to_string(),
            "pretrain_stop_on_convergence" => self.pretrain_stop_on_convergence.to_string(),
            "rays" => self.env.sensor.rays.to_string(),
            "fov" => self.env.sensor.fov_degrees.to_string(),
            "max_range" => self.env.sensor.max_range.to_string(),
            "history" => self.env.history.to_string(),
            "slip_prob" => self.env.slip_prob.to_string(),
            "max_steps" => self.env.max_steps.to_string(),
            "phi_dim" => self.sf.phi_dim.to_string(),
            "encoder_hidden" => join(&self.sf.encoder_hidden),
            "decoder_hidden" => join(&self.sf.decoder_hidden),
            "psi_hidden" => self.sf.psi_hidden.to_string(),
            "q_hidden" => self.q_hidden.to_string(),
            "multitask_sf" => self.sf.multitask_sf.to_string(),
            "readout" => readout_name(self.sf.readout).to_string(),
            "copy_init" => self.copy_init.to_string(),
            "reward_weight" => self.sf.reward_weight.to_string(),
            "reconstruction_weight" => self.sf.reconstruction_weight.to_string(),
            "mapping_weight" => self.sf.mapping_weight.to_string(),
            "matrix_episodes" => self.matrix_episodes.to_string(),
            "imitation_samples" => self.imitation_samples.to_string(),
            "imitation_updates" => self.imitation_updates.to_string(),
            "imitation_eval_every" => self.imitation_eval_every.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. Errors carry 1-based line numbers.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(k.trim(), v).map_err(|msg| Error::Config { line: i + 1, msg })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override; reported as line 0.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            line: 0,
            msg: format!("override must look like key=value, got {kv:?}"),
        })?;
        self.set(k.trim(), v).map_err(|msg| Error::Config {
            line: 0,
            msg: format!("override {kv:?}: {msg}"),
        })
    }

    /// Every key with its value, defaults included.
    pub fn to_resolved_string(&self) -> String {
        let mut out = String::new();
        for k in Self::KEYS.iter().chain(&Self::EXTRA_KEYS) {
            out.push_str(&format!("{k} = {}\n", self.get(k).expect("known key")));
        }
        out
    }

    /// Checks cross-field constraints and loads every map.
    pub fn validate(&self) -> Result<Vec<MazeMap>> {
        let err = |msg: String| Error::Config { line: 0, msg };
        if self.maps.is_empty() {
            return Err(err("at least one map is required".into()));
        }
        let maps = self
            .maps
            .iter()
            .map(|m| resolve_map(m))
            .collect::<Result<Vec<_>>>()?;
        self.schedule.validate().map_err(|e| err(e.to_string()))?;
        if self.agent == AgentKind::Dqn && maps.len() > 1 {
            return Err(err(
                "agent dqn trains one map; use dqn-finetune or dqn-fixfeature for sequences".into(),
            ));
        }
        if self.agent == AgentKind::Imitation && maps.len() > 1 {
            return Err(err("agent imitation trains one map".into()));
        }
        if self.env.history == 0 || self.env.sensor.rays == 0 {
            return Err(err("history and rays must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.env.slip_prob) {
            return Err(err("slip_prob must lie in [0, 1]".into()));
        }
        if self.matrix_episodes == 0 {
            return Err(err("matrix_episodes must be positive".into()));
        }
        Ok(maps)
    }

    /// The schedule for task `k` of the sequence.
    pub fn schedule_for(&self, k: usize) -> TrainSchedule {
        let mut s = self.schedule.clone();
        if self.pretrain_stop_on_convergence && k + 1 < self.maps.len() {
            s.stop_on_convergence = true;
        }
        s
    }

    pub fn encoder_dims(&self) -> Vec<usize> {
        let mut d = vec![self.env.state_dim()];
        d.extend(&self.sf.encoder_hidden);
        d.push(self.sf.phi_dim);
        d
    }

    pub fn sensor(&self) -> SensorConfig {
        self.env.sensor
    }
}

/// Bundled experiments: name and description.
pub const PRESETS: [(&str, &str); 13] = [
    ("scratch-map1", "SF agent from scratch on map1"),
    ("scratch-map2", "SF agent from scratch on map2"),
    ("transfer-map1-map2", "SF agent on map1, then transferred to map2"),
    ("scratch-map4", "SF agent from scratch on map4"),
    ("transfer-map3-map4", "SF agent on map3, then transferred to map4"),
    ("imitation-map1", "planner imitation on map1"),
    ("dqn-scratch-map1", "DQN from scratch on map1"),
    ("dqn-scratch-map2", "DQN from scratch on map2"),
    ("dqn-scratch-map4", "DQN from scratch on map4"),
    ("dqn-finetune-map1-map2", "DQN on map1, fine-tuned on map2"),
    ("dqn-fixfeature-map1-map2", "DQN on map1, head retrained on map2"),
    ("dqn-finetune-map3-map4", "DQN on map3, fine-tuned on map4"),
    ("dqn-fixfeature-map3-map4", "DQN on map3, head retrained on map4"),
];

/// Config text of a bundled preset.
pub fn preset_text(name: &str) -> Option<String> {
    let (agent, maps) = match name {
        "scratch-map1" => ("sf", "map1"),
        "scratch-map2" => ("sf", "map2"),
        "transfer-map1-map2" => ("sf", "map1,map2"),
        "scratch-map4" => ("sf", "map4"),
        "transfer-map3-map4" => ("sf", "map3,map4"),
        "imitation-map1" => ("imitation", "map1"),
        "dqn-scratch-map1" => ("dqn", "map1"),
        "dqn-scratch-map2" => ("dqn", "map2"),
        "dqn-scratch-map4" => ("dqn", "map4"),
        "dqn-finetune-map1-map2" => ("dqn-finetune", "map1,map2"),
        "dqn-fixfeature-map1-map2" => ("dqn-fixfeature", "map1,map2"),
        "dqn-finetune-map3-map4" => ("dqn-finetune", "map3,map4"),
        "dqn-fixfeature-map3-map4" => ("dqn-fixfeature", "map3,map4"),
        _ => return None,
    };
    let mut text = format!("# preset {name}\nagent = {agent}\nmaps = {maps}\noutput_dir = {name}\n");
    if agent == "sf" {
        text.push_str("reward_weight = 10\n");
    }
    if maps.contains(',') {
        text.push_str("pretrain_stop_on_convergence = true\n");
    }
    if maps.contains("map3") || maps.contains("map4") {
        text.push_str("max_steps = 500\n");
    }
    Some(text)
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    preset_text(name).map(|t| ExperimentConfig::parse(&t).expect("bundled presets parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
        assert_eq!(ExperimentConfig::parse("# only a comment\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn gamma_out_of_range_names_line() {
        match ExperimentConfig::parse("seed = 1\ngamma = 1.5\n") {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("gamma"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_and_bad_type_are_rejected() {
        assert!(matches!(
            ExperimentConfig::parse("colour = red"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("\nseed = seven"),
            Err(Error::Config { line: 2, .. })
        ));
    }

    #[test]
    fn override_beats_file() {
        let mut c = ExperimentConfig::parse("seed = 3").unwrap();
        c.apply_override("seed=7").unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn resolved_form_round_trips() {
        let mut c = preset("transfer-map3-map4").unwrap();
        c.sf.readout = OldTaskReadout::MappedOutput;
        c.sf.encoder_hidden = vec![32, 16];
        c.schedule.learning_rate = 1e-3;
        let back = ExperimentConfig::parse(&c.to_resolved_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn presets_validate() {
        for (name, _) in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(c.output_dir, PathBuf::from(name));
        }
    }
}

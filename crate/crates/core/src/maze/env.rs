use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::maze::{observe, Action, Cell, MazeMap, Observation, Pose, SensorConfig, Heading};
use crate::rng::stream;

pub const STEP_REWARD: f64 = -0.04;
pub const COLLISION_REWARD: f64 = -1.0;
pub const GOAL_REWARD: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvConfig {
    pub sensor: SensorConfig,
    /// Frames per stacked state.
    pub history: usize,
    /// Probability that the executed action is replaced by `Stand`.
    pub slip_prob: f64,
    /// Episodes are truncated (not terminated) after this many steps.
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            sensor: SensorConfig::default(),
            history: 4,
            slip_prob: 0.05,
            max_steps: 200,
        }
    }
}

impl EnvConfig {
    /// Length of a flattened stacked state.
    pub fn state_dim(&self) -> usize {
        self.history * 2 * self.sensor.rays
    }
}

/// The last `H` observations, oldest first, flattened frame by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedState {
    history: usize,
    frame_len: usize,
    data: Vec<f32>,
}

impl StackedState {
    /// Episode-start state: `first` replicated `history` times.
    pub fn new(first: &Observation, history: usize) -> Self {
        let frame = first.to_features();
        let frame_len = frame.len();
        let mut data = Vec::with_capacity(frame_len * history);
        for _ in 0..history {
            data.extend_from_slice(&frame);
        }
        StackedState {
            history,
            frame_len,
            data,
        }
    }

    /// Drops the oldest frame and appends `obs`.
    pub fn push(&mut self, obs: &Observation) {
        let frame = obs.to_features();
        debug_assert_eq!(frame.len(), self.frame_len);
        self.data.rotate_left(self.frame_len);
        let start = self.data.len() - self.frame_len;
        self.data[start..].copy_from_slice(&frame);
    }

    pub fn history(&self) -> usize {
        self.history
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks(self.frame_len)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub state: StackedState,
    pub reward: f64,
    /// The agent occupies the goal cell.
    pub terminal: bool,
    /// The step budget ran out before the goal was reached.
    pub truncated: bool,
    pub collided: bool,
    /// Ground truth, for oracles and analysis only.
    pub pose: Pose,
    /// Action actually executed after slip.
    pub executed: Action,
}

/// Deterministic dynamics: `(next_pose, reward, terminal, collided)`.
pub fn transition(map: &MazeMap, pose: Pose, action: Action) -> (Pose, f64, bool, bool) {
    match action {
        Action::Stand => (pose, STEP_REWARD, false, false),
        Action::TurnLeft => (Pose { heading: pose.heading.left(), ..pose }, STEP_REWARD, false, false),
        Action::TurnRight => (Pose { heading: pose.heading.right(), ..pose }, STEP_REWARD, false, false),
        Action::Forward => {
            let (nx, ny) = pose.ahead();
            match map.cell(nx, ny) {
                Cell::Wall => (pose, COLLISION_REWARD, false, true),
                Cell::Free => (Pose::new(nx as usize, ny as usize, pose.heading), STEP_REWARD, false, false),
                Cell::Goal => (Pose::new(nx as usize, ny as usize, pose.heading), GOAL_REWARD, true, false),
            }
        }
    }
}

/// Undiscounted return of a collision-free episode that reaches the goal in
/// `steps` actions: every step costs 0.04 except the goal step, worth +1.
pub fn optimal_return(steps: f64) -> f64 {
    GOAL_REWARD + STEP_REWARD * (steps - 1.0)
}

/// Uniform draw over free (non-goal) cells × headings.
pub fn random_start<R: Rng + ?Sized>(map: &MazeMap, rng: &mut R) -> Pose {
    let free = map.free_cells();
    let i = rng.gen_range(0..free.len() * 4);
    let (x, y) = free[i / 4];
    Pose::new(x, y, Heading::from_index(i % 4))
}

/// One maze instance with its own RNG stream.
#[derive(Clone, Debug)]
pub struct MazeEnv {
    map: MazeMap,
    cfg: EnvConfig,
    rng: ChaCha8Rng,
    pose: Pose,
    state: StackedState,
    steps: usize,
}

impl MazeEnv {
    pub fn new(map: MazeMap, cfg: EnvConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pose = random_start(&map, &mut rng);
        let state = StackedState::new(&observe(&map, pose, &cfg.sensor), cfg.history);
        MazeEnv {
            map,
            cfg,
            rng,
            pose,
            state,
            steps: 0,
        }
    }

    /// Environment `instance` of a run seeded with `master_seed`.
    pub fn with_stream(map: MazeMap, cfg: EnvConfig, master_seed: u64, instance: u64) -> Self {
        MazeEnv::new(map, cfg, stream(master_seed, instance))
    }

    pub fn map(&self) -> &MazeMap {
        &self.map
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn state(&self) -> &StackedState {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn set_slip_prob(&mut self, p: f64) {
        self.cfg.slip_prob = p;
    }

    pub fn set_max_steps(&mut self, n: usize) {
        self.cfg.max_steps = n;
    }

    pub fn reset(&mut self) -> (StackedState, Pose) {
        let pose = random_start(&self.map, &mut self.rng);
        self.reset_to(pose)
    }

    /// Starts an episode from a chosen pose.
    pub fn reset_to(&mut self, pose: Pose) -> (StackedState, Pose) {
        self.pose = pose;
        self.steps = 0;
        self.state = StackedState::new(&self.observe(), self.cfg.history);
        (self.state.clone(), pose)
    }

    pub fn observe(&self) -> Observation {
        observe(&self.map, self.pose, &self.cfg.sensor)
    }

    pub fn step(&mut self, action: Action) -> StepResult {
        let executed = if self.cfg.slip_prob > 0.0 && self.rng.gen::<f64>() < self.cfg.slip_prob {
            Action::Stand
        } else {
            action
        };
        let (pose, reward, terminal, collided) = transition(&self.map, self.pose, executed);
        self.pose = pose;
        self.steps += 1;
        let obs = self.observe();
        self.state.push(&obs);
        StepResult {
            state: self.state.clone(),
            reward,
            terminal,
            truncated: !terminal && self.steps >= self.cfg.max_steps,
            collided,
            pose,
            executed,
        }
    }
}

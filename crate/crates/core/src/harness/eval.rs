use rand::Rng;

use crate::error::{Error, Result};
use crate::maze::{random_start, Action, EnvConfig, MazeEnv, MazeMap, Planner, Pose, StackedState};
use crate::rng::{rng_for, stream};

/// Something that picks an action for a state. The pose is ground truth and
/// only the planner oracle may look at it.
pub trait Policy {
    fn act(&mut self, state: &StackedState, pose: Pose) -> Result<Action>;
}

impl<F: FnMut(&StackedState, Pose) -> Result<Action>> Policy for F {
    fn act(&mut self, state: &StackedState, pose: Pose) -> Result<Action> {
        self(state, pose)
    }
}

/// The planner oracle.
pub struct OraclePolicy(pub Planner);

impl Policy for OraclePolicy {
    fn act(&mut self, _state: &StackedState, pose: Pose) -> Result<Action> {
        self.0.optimal_action(pose)
    }
}

/// Uniformly random actions from a fixed stream.
pub struct RandomPolicy<R>(pub R);

impl<R: Rng> Policy for RandomPolicy<R> {
    fn act(&mut self, _state: &StackedState, _pose: Pose) -> Result<Action> {
        Ok(Action::from_index(self.0.gen_range(0..Action::COUNT)).expect("in range"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub reward: f64,
    pub steps: usize,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub successes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_steps: f64,
    pub std_steps: f64,
}

impl EvalSummary {
    pub fn success_ratio(&self) -> f64 {
        self.successes as f64 / self.episodes as f64
    }

    pub fn from_outcomes(outcomes: &[EpisodeOutcome]) -> Self {
        let (mr, sr) = mean_std(outcomes.iter().map(|o| o.reward));
        let (ms, ss) = mean_std(outcomes.iter().map(|o| o.steps as f64));
        EvalSummary {
            episodes: outcomes.len(),
            successes: outcomes.iter().filter(|o| o.success).count(),
            mean_reward: mr,
            std_reward: sr,
            mean_steps: ms,
            std_steps: ss,
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Start pose of evaluation episode `episode` under `seed`.
pub fn eval_start(map: &MazeMap, seed: u64, episode: u64) -> Pose {
    random_start(map, &mut rng_for(seed, episode))
}

/// Runs one episode without slip from `start`.
pub fn run_episode(policy: &mut dyn Policy, map: &MazeMap, env_cfg: EnvConfig, start: Pose) -> Result<EpisodeOutcome> {
    let cfg = EnvConfig {
        slip_prob: 0.0,
        ..env_cfg
    };
    let mut env = MazeEnv::new(map.clone(), cfg, 0);
    let (mut state, mut pose) = env.reset_to(start);
    let mut reward = 0.0;
    loop {
        let r = env.step(policy.act(&state, pose)?);
        reward += r.reward;
        if r.terminal || r.truncated {
            return Ok(EpisodeOutcome {
                reward,
                steps: env.steps(),
                success: r.terminal,
            });
        }
        state = r.state;
        pose = r.pose;
    }
}

/// Greedy rollouts from `n_episodes` random starts, slip disabled.
///
/// Each episode's start comes from its own stream under `seed`, so the
/// result does not depend on the order episodes are run in.
pub fn evaluate(
    policy: &mut dyn Policy,
    map: &MazeMap,
    env_cfg: EnvConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalSummary> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    let outcomes = (0..n_episodes as u64)
        .map(|e| run_episode(policy, map, env_cfg, eval_start(map, seed, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::from_outcomes(&outcomes))
}

/// Seed for the `index`-th periodic evaluation of a run.
pub fn eval_seed(run_seed: u64, task: usize, index: u64) -> u64 {
    stream(stream(run_seed, 0xe7a1 + task as u64), index)
}

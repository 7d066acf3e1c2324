use crate::error::{Error, Result};

/// Step counts and optimiser settings for one training stage.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub update_every: u64,
    /// Counted in gradient updates.
    pub target_sync_every: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Length of the linear decay, which begins when warmup ends.
    pub epsilon_anneal_steps: u64,
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    /// Feature-objective steps per successor-feature step.
    pub phi_updates_per_update: usize,
    /// States kept from each finished task for feature-map fitting.
    pub retained_states: usize,
    /// Stop once success ≥ 0.9 on two consecutive evaluations.
    pub stop_on_convergence: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            total_steps: 200_000,
            warmup_steps: 2_000,
            update_every: 4,
            target_sync_every: 1_000,
            eval_every: 5_000,
            eval_episodes: 50,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_anneal_steps: 30_000,
            gamma: 0.99,
            batch_size: 64,
            learning_rate: 2.5e-4,
            buffer_capacity: 50_000,
            phi_updates_per_update: 1,
            retained_states: 2048,
            stop_on_convergence: false,
        }
    }
}

pub const CONVERGENCE_SUCCESS: f64 = 0.9;

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.total_steps > 0 && self.warmup_steps >= self.total_steps {
            return bad(format!(
                "warmup_steps ({}) must be below total_steps ({})",
                self.warmup_steps, self.total_steps
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon values must lie in [0, 1]".into());
        }
        if self.epsilon_end > self.epsilon_start {
            return bad("epsilon_end must not exceed epsilon_start".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if self.update_every == 0 || self.target_sync_every == 0 || self.eval_every == 0 {
            return bad("update_every, target_sync_every and eval_every must be positive".into());
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive".into());
        }
        Ok(())
    }

    /// Exploration rate before env step `step` (0-based).
    pub fn epsilon(&self, step: u64) -> f64 {
        if step <= self.warmup_steps {
            return self.epsilon_start;
        }
        let t = step - self.warmup_steps;
        if self.epsilon_anneal_steps == 0 || t >= self.epsilon_anneal_steps {
            return self.epsilon_end;
        }
        let frac = t as f64 / self.epsilon_anneal_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Whether the `step`-th env step (1-based) triggers a gradient update.
    pub fn is_update_step(&self, step: u64) -> bool {
        step > self.warmup_steps && (step - self.warmup_steps) % self.update_every == 0
    }

    pub fn updates_after(&self, steps: u64) -> u64 {
        steps.saturating_sub(self.warmup_steps) / self.update_every
    }
}

/// First evaluation step of the earliest pair of consecutive evaluations
/// with success at or above the convergence threshold.
pub fn steps_to_convergence(evals: &[(u64, f64)]) -> Option<u64> {
    evals
        .windows(2)
        .find(|w| w[0].1 >= CONVERGENCE_SUCCESS && w[1].1 >= CONVERGENCE_SUCCESS)
        .map(|w| w[0].0)
}

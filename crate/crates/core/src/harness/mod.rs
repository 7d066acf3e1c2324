//! Replay, exploration schedule, training loop, evaluation protocol and
//! task sequencing.

mod eval;
mod learner;
mod metrics;
mod replay;
mod schedule;
mod train;

pub use eval::{
    eval_seed, eval_start, evaluate, mean_std, run_episode, EpisodeOutcome, EvalSummary, OraclePolicy, Policy,
    RandomPolicy,
};
pub use learner::{DqnLearner, Learner, LossValues, SfLearner};
pub use metrics::{
    matrix_csv, metrics_csv, write_atomic, MatrixRow, MetricsRow, MATRIX_HEADER, METRICS_HEADER,
};
pub use replay::{stack_states, ReplayBuffer, Transition};
pub use schedule::{steps_to_convergence, TrainSchedule, CONVERGENCE_SUCCESS};
pub use train::{
    evaluate_learner, run_training, run_transfer_sequence, RunOptions, SequenceOutcome, StageOutcome,
    CHECKPOINT_FILE, HALT_CHECKPOINT_FILE, MATRIX_FILE, METRICS_FILE,
};

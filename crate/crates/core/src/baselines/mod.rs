//! Comparison learners: DQN with its two transfer variants, and
//! behaviour cloning from planner labels.

mod dqn;
mod imitation;

pub use dqn::{DqnModel, TransferMode};
pub use imitation::{build_imitation_dataset, ImitationModel, LabeledDataset};

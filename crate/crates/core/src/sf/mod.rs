//! Successor-feature agent: shared encoder, per-task successor heads,
//! reward weights and feature maps between task feature spaces.

mod checkpoint;
mod loss;
mod model;
mod pose;

pub use loss::{PhiLoss, RetainedBatch};
pub use pose::{regress_pose_from_features, PoseFit, PoseProbeConfig, MIN_POSE_SAMPLES};
pub use model::{state_tensor, OldTaskReadout, SfConfig, SfModel, TaskHead};

//! Successor-feature reinforcement learning with cross-task transfer.

pub mod baselines;
pub mod batch;
pub mod config;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod maze;
pub mod nn;
pub mod report;
pub mod rng;
pub mod sf;
pub mod verify;

pub use error::{Error, Result};

//! Harness around `asyncrl-core`: run configuration, training with periodic
//! greedy evaluation, learning-rate sweeps, thread-scaling benchmarks,
//! checkpoints and metrics files.

pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod eval;
pub mod metrics;
pub mod sweep;
pub mod train;

pub use error::{CheckpointError, HarnessError, Result};

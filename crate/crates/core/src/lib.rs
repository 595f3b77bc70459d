//! Core of an asynchronous actor-learner reinforcement-learning engine.
//!
//! Many threads each own an environment copy, compute gradients against a
//! private snapshot of the parameters, and push updates into a lock-free
//! shared parameter store. Four learners are provided: one-step Q, one-step
//! Sarsa, n-step Q and advantage actor-critic (discrete and Gaussian).

pub mod algo;
pub mod env;
mod error;
pub mod nn;
pub mod optim;
pub mod shared;

pub use error::{Error, Result};

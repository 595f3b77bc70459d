//! The four asynchronous learners and the pieces they are built from.

pub mod exploration;
pub mod gradients;
mod learner;
pub mod targets;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use exploration::{epsilon_greedy, sample_epsilon_final, EpsilonSupport, ExplorationPolicy};
pub use gradients::{
    a3c_gradients, n_step_q_gradients, one_step_gradient, state_value, A3cStep, OneStepRule, OneStepTransition,
    Trajectory,
};
pub use learner::{greedy_action, run_actor_learner, thread_seed, ActorLearner, SharedContext, ThreadStats};
pub use targets::{n_step_returns, one_step_q_target, one_step_sarsa_target};

use crate::error::config_err;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Asynchronous one-step Q-learning.
    Q1,
    /// Asynchronous one-step Sarsa.
    Sarsa1,
    /// Asynchronous n-step Q-learning.
    Qn,
    /// Advantage actor-critic, softmax policy sharing layers with the value.
    A3c,
    /// Advantage actor-critic with a Gaussian policy and separate value net.
    A3cContinuous,
}

impl Algorithm {
    pub fn is_value_based(self) -> bool {
        matches!(self, Self::Q1 | Self::Sarsa1 | Self::Qn)
    }

    pub fn uses_target_network(self) -> bool {
        self.is_value_based()
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q1" => Ok(Self::Q1),
            "sarsa1" => Ok(Self::Sarsa1),
            "qn" => Ok(Self::Qn),
            "a3c" => Ok(Self::A3c),
            "a3c_continuous" | "a3c-continuous" => Ok(Self::A3cContinuous),
            other => config_err(format!("unknown algorithm `{other}`")),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Q1 => "q1",
            Self::Sarsa1 => "sarsa1",
            Self::Qn => "qn",
            Self::A3c => "a3c",
            Self::A3cContinuous => "a3c_continuous",
        })
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub gamma: f64,
    /// Rollout length for n-step methods; accumulation period for the
    /// one-step methods.
    pub t_max: usize,
    /// Target network refresh period in frames.
    pub target_interval: u64,
    /// Entropy regularization weight.
    pub beta: f64,
    pub epsilon: EpsilonSupport,
    /// Frames over which epsilon anneals from 1 to its final value.
    pub anneal_frames: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f32>,
    /// Draw a fresh final epsilon at every episode start.
    #[serde(default)]
    pub resample_epsilon_each_episode: bool,
    /// Bootstrap from the value of the last state when an episode is cut by
    /// its step cap. When false, the cut is treated like a terminal state.
    #[serde(default = "default_true")]
    pub bootstrap_on_truncation: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            t_max: 5,
            target_interval: 40_000,
            beta: 0.01,
            epsilon: EpsilonSupport::default(),
            anneal_frames: 4_000_000,
            clip_norm: None,
            resample_epsilon_each_episode: false,
            bootstrap_on_truncation: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return config_err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.t_max == 0 {
            return config_err("t_max must be positive");
        }
        if self.target_interval == 0 {
            return config_err("target interval must be positive");
        }
        if !(self.beta >= 0.0) {
            return config_err("beta must be non-negative");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return config_err("clip norm must be positive");
            }
        }
        self.epsilon.validate()
    }
}

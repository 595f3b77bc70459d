//! Small environments with a common step/reset interface, and exact
//! dynamic-programming solutions for the enumerable ones.

mod chain;
mod maze;
mod point_mass;
mod tabular;

use serde::{Deserialize, Serialize};

pub use chain::ChainMdp;
pub use maze::{GridMaze, MazeLayout, MOVES};
pub use point_mass::PointMass1D;
pub use tabular::{value_iteration, value_iteration_for_env, QTable, TabularMdp, Transition};

use crate::error::config_err;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSpace {
    Discrete(usize),
    /// Box `[-1, 1]^d`; out-of-range actions are clamped.
    Continuous(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f32>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f32>,
    pub reward: f32,
    /// The episode reached a terminal state; nothing follows it.
    pub terminal: bool,
    /// The episode was cut by its step cap; the state is not terminal.
    pub truncated: bool,
}

impl EnvStep {
    pub fn episode_over(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment: Send {
    fn observation_dim(&self) -> usize;

    fn action_space(&self) -> ActionSpace;

    /// Starts a new episode. The same seed always yields the same start.
    fn reset(&mut self, seed: u64) -> Vec<f32>;

    fn step(&mut self, action: &Action) -> Result<EnvStep>;

    /// Upper bound on `|reward|` for a single step.
    fn max_abs_reward(&self) -> f64;

    /// Exact model of the environment, when it has one.
    fn as_tabular(&self) -> Option<&dyn TabularMdp> {
        None
    }
}

fn default_chain_states() -> usize {
    5
}
fn default_chain_cap() -> u32 {
    50
}
fn default_maze_side() -> usize {
    8
}
fn default_apples() -> usize {
    4
}
fn default_maze_cap() -> u32 {
    500
}
fn default_dt() -> f32 {
    0.1
}
fn default_pm_len() -> u32 {
    200
}

/// Environment selection as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Chain {
        #[serde(default = "default_chain_states")]
        n_states: usize,
        #[serde(default = "default_chain_cap")]
        episode_cap: u32,
    },
    GridMaze {
        #[serde(default = "default_maze_side")]
        width: usize,
        #[serde(default = "default_maze_side")]
        height: usize,
        #[serde(default = "default_apples")]
        apples: usize,
        #[serde(default = "default_maze_cap")]
        episode_cap: u32,
        /// Fixes the layout regardless of the reset seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout_seed: Option<u64>,
        /// Entering the portal ends the episode instead of respawning.
        #[serde(default)]
        portal_terminal: bool,
    },
    PointMass {
        #[serde(default = "default_dt")]
        dt: f32,
        #[serde(default = "default_pm_len")]
        episode_len: u32,
    },
}

impl EnvConfig {
    pub fn chain() -> Self {
        Self::Chain {
            n_states: default_chain_states(),
            episode_cap: default_chain_cap(),
        }
    }

    pub fn grid_maze(layout_seed: Option<u64>) -> Self {
        Self::GridMaze {
            width: default_maze_side(),
            height: default_maze_side(),
            apples: default_apples(),
            episode_cap: default_maze_cap(),
            layout_seed,
            portal_terminal: false,
        }
    }

    pub fn point_mass() -> Self {
        Self::PointMass {
            dt: default_dt(),
            episode_len: default_pm_len(),
        }
    }

    /// Short name used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Chain { .. } => "chain",
            Self::GridMaze { .. } => "grid-maze",
            Self::PointMass { .. } => "point-mass",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "chain" => Ok(Self::chain()),
            "grid-maze" | "grid_maze" | "maze" => Ok(Self::grid_maze(None)),
            "point-mass" | "point_mass" => Ok(Self::point_mass()),
            other => config_err(format!("unknown environment `{other}`")),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match *self {
            Self::Chain { n_states, episode_cap } => Box::new(ChainMdp::new(n_states, episode_cap)?),
            Self::GridMaze {
                width,
                height,
                apples,
                episode_cap,
                layout_seed,
                portal_terminal,
            } => Box::new(GridMaze::new(
                width,
                height,
                apples,
                episode_cap,
                layout_seed,
                portal_terminal,
            )?),
            Self::PointMass { dt, episode_len } => Box::new(PointMass1D::new(dt, episode_len)?),
        })
    }
}

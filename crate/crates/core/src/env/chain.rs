use super::{Action, ActionSpace, EnvStep, Environment, TabularMdp, Transition};
use crate::error::config_err;
use crate::{Error, Result};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Deterministic corridor of `n` states. The agent starts in state 0;
/// entering state `n - 1` pays 1 and ends the episode. Moving left from
/// state 0 stays put. Observations are one-hot over the states.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    n_states: usize,
    episode_cap: u32,
    state: usize,
    steps: u32,
}

impl ChainMdp {
    pub fn new(n_states: usize, episode_cap: u32) -> Result<Self> {
        if n_states < 2 {
            return config_err("a chain needs at least two states");
        }
        if episode_cap == 0 {
            return config_err("episode cap must be positive");
        }
        Ok(Self {
            n_states,
            episode_cap,
            state: 0,
            steps: 0,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// One-hot encoding of `state`.
    pub fn observe(&self, state: usize) -> Vec<f32> {
        let mut obs = vec![0.0; self.n_states];
        obs[state] = 1.0;
        obs
    }

    fn next_state(&self, state: usize, action: usize) -> usize {
        match action {
            LEFT => state.saturating_sub(1),
            RIGHT => (state + 1).min(self.n_states - 1),
            _ => state,
        }
    }
}

impl Environment for ChainMdp {
    fn observation_dim(&self) -> usize {
        self.n_states
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn reset(&mut self, _seed: u64) -> Vec<f32> {
        self.state = 0;
        self.steps = 0;
        self.observe(0)
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let a = match *action {
            Action::Discrete(a) if a < 2 => a,
            ref other => return Err(Error::Config(format!("invalid chain action {other:?}"))),
        };
        if self.state == self.n_states - 1 {
            return Err(Error::Env("step called on a finished episode".into()));
        }
        self.state = self.next_state(self.state, a);
        self.steps += 1;
        let terminal = self.state == self.n_states - 1;
        Ok(EnvStep {
            observation: self.observe(self.state),
            reward: if terminal { 1.0 } else { 0.0 },
            terminal,
            truncated: !terminal && self.steps >= self.episode_cap,
        })
    }

    fn max_abs_reward(&self) -> f64 {
        1.0
    }

    fn as_tabular(&self) -> Option<&dyn TabularMdp> {
        Some(self)
    }
}

impl TabularMdp for ChainMdp {
    fn num_states(&self) -> usize {
        self.n_states
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn is_terminal(&self, state: usize) -> bool {
        state == self.n_states - 1
    }

    fn transitions(&self, state: usize, action: usize) -> Vec<Transition> {
        let next = self.next_state(state, action);
        let terminal = self.is_terminal(next);
        vec![Transition {
            prob: 1.0,
            next,
            reward: if terminal { 1.0 } else { 0.0 },
            terminal,
        }]
    }
}

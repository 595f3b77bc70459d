use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, EnvStep, Environment};
use crate::error::config_err;
use crate::{Error, Result};

/// Positions are clamped to `[-BOUND, BOUND]`; the velocity is zeroed on
/// contact with a bound.
pub const BOUND: f32 = 2.0;

/// A unit mass on a line pushed by a force in `[-1, 1]` toward a target.
///
/// `v' = v + a dt`, `x' = x + v' dt`, reward `-(x' - target)^2 dt`.
/// Observation is `[x, v, target]`. Start position and target are drawn
/// uniformly from `[-1, 1]` with the reset seed; velocity starts at 0.
#[derive(Debug, Clone)]
pub struct PointMass1D {
    dt: f32,
    episode_len: u32,
    position: f32,
    velocity: f32,
    target: f32,
    steps: u32,
}

impl PointMass1D {
    pub fn new(dt: f32, episode_len: u32) -> Result<Self> {
        if !(dt > 0.0) || episode_len == 0 {
            return config_err("point mass needs dt > 0 and a positive episode length");
        }
        Ok(Self {
            dt,
            episode_len,
            position: 0.0,
            velocity: 0.0,
            target: 0.0,
            steps: 0,
        })
    }

    /// Places the mass at an explicit state, for tests and probes.
    pub fn set_state(&mut self, position: f32, velocity: f32, target: f32) {
        self.position = position;
        self.velocity = velocity;
        self.target = target;
        self.steps = 0;
    }

    pub fn state(&self) -> (f32, f32, f32) {
        (self.position, self.velocity, self.target)
    }

    fn observe(&self) -> Vec<f32> {
        vec![self.position, self.velocity, self.target]
    }
}

impl Environment for PointMass1D {
    fn observation_dim(&self) -> usize {
        3
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(1)
    }

    fn reset(&mut self, seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let position = rng.random_range(-1.0..=1.0);
        let target = rng.random_range(-1.0..=1.0);
        self.set_state(position, 0.0, target);
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<EnvStep> {
        let force = match action {
            Action::Continuous(a) if a.len() == 1 => a[0],
            other => return Err(Error::Config(format!("invalid point-mass action {other:?}"))),
        };
        if !force.is_finite() {
            return Err(Error::Env(format!("non-finite action {force}")));
        }
        let force = force.clamp(-1.0, 1.0);
        self.velocity += force * self.dt;
        self.position += self.velocity * self.dt;
        if self.position.abs() > BOUND {
            self.position = self.position.clamp(-BOUND, BOUND);
            self.velocity = 0.0;
        }
        self.steps += 1;
        let err = self.position - self.target;
        Ok(EnvStep {
            observation: self.observe(),
            reward: -(err * err) * self.dt,
            terminal: false,
            truncated: self.steps >= self.episode_len,
        })
    }

    fn max_abs_reward(&self) -> f64 {
        // |x - target| <= BOUND + 1
        f64::from((BOUND + 1.0) * (BOUND + 1.0) * self.dt)
    }
}

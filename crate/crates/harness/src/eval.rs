//! Greedy evaluation of parameter snapshots and checkpoints.

use std::path::Path;

use asyncrl_core::algo::greedy_action;
use asyncrl_core::env::{value_iteration, Action, ActionSpace, ChainMdp, EnvConfig};
use asyncrl_core::nn::{forward, Architecture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPolicy {
    /// argmax Q, argmax pi, or the Gaussian mean.
    Greedy,
    /// Uniformly random actions; the baseline for learning checks.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation of the episode scores.
    pub std: f64,
    pub scores: Vec<f64>,
}

impl EvalResult {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let n = scores.len().max(1) as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            scores,
        }
    }
}

/// Runs `episodes` full episodes and returns the undiscounted scores.
/// Episode starts come from `seed`, so equal inputs give equal results.
pub fn evaluate_params(
    arch: &Architecture,
    theta: &[f32],
    theta_v: &[f32],
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    policy: EvalPolicy,
) -> Result<EvalResult> {
    let mut env = env_cfg.build()?;
    if env.observation_dim() != arch.input_dim() {
        return Err(HarnessError::Config(format!(
            "{} observations have {} entries, network {} expects {}",
            env_cfg.name(),
            env.observation_dim(),
            arch.describe(),
            arch.input_dim()
        )));
    }
    let space = env.action_space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng.random::<u64>());
        let mut score = 0.0;
        loop {
            let action = match policy {
                EvalPolicy::Greedy => greedy_action(arch, theta, theta_v, &obs)?,
                EvalPolicy::Random => random_action(space, &mut rng),
            };
            let step = env.step(&action)?;
            score += f64::from(step.reward);
            if step.episode_over() {
                break;
            }
            obs = step.observation;
        }
        scores.push(score);
    }
    Ok(EvalResult::from_scores(scores))
}

fn random_action(space: ActionSpace, rng: &mut ChaCha8Rng) -> Action {
    match space {
        ActionSpace::Discrete(n) => Action::Discrete(rng.random_range(0..n)),
        ActionSpace::Continuous(d) => Action::Continuous((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()),
    }
}

/// Loads a checkpoint for the network `cfg` describes and evaluates it.
pub fn evaluate_checkpoint(
    cfg: &RunConfig,
    path: &Path,
    episodes: usize,
    seed: u64,
    policy: EvalPolicy,
) -> Result<EvalResult> {
    let arch = cfg.architecture()?;
    let ck = Checkpoint::load(path, Some(&arch))?;
    evaluate_params(&arch, &ck.theta, &ck.theta_v, &cfg.env, episodes, seed, policy)
}

/// Comparison of a Q network on a chain against value iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainQReport {
    /// Max-norm error over all non-terminal state-action pairs.
    pub max_error: f64,
    /// The greedy action is optimal in every non-terminal state.
    pub greedy_optimal: bool,
}

pub fn chain_q_report(arch: &Architecture, theta: &[f32], env_cfg: &EnvConfig, gamma: f64) -> Result<ChainQReport> {
    let EnvConfig::Chain { n_states, episode_cap } = *env_cfg else {
        return Err(HarnessError::Config(
            "chain comparison needs the chain environment".into(),
        ));
    };
    let Architecture::Q(spec) = arch else {
        return Err(HarnessError::Config("chain comparison needs a Q network".into()));
    };
    let chain = ChainMdp::new(n_states, episode_cap)?;
    let oracle = value_iteration(&chain, gamma, 1e-12)?;
    let mut max_error = 0.0f64;
    let mut greedy_optimal = true;
    for s in 0..n_states - 1 {
        let (out, _) = forward(spec, theta, &[], &chain.observe(s))?;
        let q = out.q_values();
        for (a, &qa) in q.iter().enumerate() {
            max_error = max_error.max((f64::from(qa) - oracle.q[s][a]).abs());
        }
        let best = asyncrl_core::nn::argmax(q);
        greedy_optimal &= oracle.greedy_actions(s, 1e-9).contains(&best);
    }
    Ok(ChainQReport {
        max_error,
        greedy_optimal,
    })
}

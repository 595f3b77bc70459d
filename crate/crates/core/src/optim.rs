//! Lock-free optimizers: momentum SGD, RMSProp with per-thread statistics,
//! and RMSProp whose squared-gradient average is shared by all threads.
//!
//! Every rule writes into a shared [`AtomicF32Vec`] with per-element
//! indivisible adds. The gradients handed in are loss gradients: the
//! optimizer subtracts them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::config_err;
use crate::shared::AtomicF32Vec;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[serde(rename = "sgd")]
    MomentumSgd,
    Rmsprop,
    SharedRmsprop,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" | "momentum-sgd" | "momentum_sgd" => Ok(Self::MomentumSgd),
            "rmsprop" => Ok(Self::Rmsprop),
            "shared-rmsprop" | "shared_rmsprop" => Ok(Self::SharedRmsprop),
            other => config_err(format!("unknown optimizer kind `{other}`")),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MomentumSgd => "sgd",
            Self::Rmsprop => "rmsprop",
            Self::SharedRmsprop => "shared-rmsprop",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// RMSProp decay of the squared-gradient average.
    pub decay: f32,
    /// Momentum coefficient for momentum SGD.
    pub momentum: f32,
    /// Added to the squared-gradient average under the square root.
    pub epsilon: f32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::SharedRmsprop,
            decay: 0.99,
            momentum: 0.9,
            epsilon: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.decay) {
            return config_err(format!("rmsprop decay must be in [0, 1), got {}", self.decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return config_err(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.epsilon > 0.0) {
            return config_err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// `eta(T) = eta0 * max(0, 1 - T / total_steps)`, or constant when no
/// horizon is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRateSchedule {
    pub eta0: f64,
    pub total_steps: Option<u64>,
}

impl LearningRateSchedule {
    pub fn linear(eta0: f64, total_steps: u64) -> Self {
        Self {
            eta0,
            total_steps: Some(total_steps),
        }
    }

    pub fn constant(eta0: f64) -> Self {
        Self {
            eta0,
            total_steps: None,
        }
    }

    pub fn eta(&self, t: u64) -> f64 {
        match self.total_steps {
            None => self.eta0,
            Some(0) => 0.0,
            Some(total) => self.eta0 * (1.0 - t as f64 / total as f64).max(0.0),
        }
    }
}

#[derive(Debug)]
enum Accumulator {
    Momentum(Vec<f32>),
    Private(Vec<f32>),
    Shared(Arc<AtomicF32Vec>),
}

/// One thread's handle on an optimizer. Momentum and plain RMSProp state is
/// owned by the handle; shared RMSProp handles point at one common `g`.
#[derive(Debug)]
pub struct Optimizer {
    config: OptimizerConfig,
    acc: Accumulator,
}

impl Optimizer {
    pub fn kind(&self) -> OptimizerKind {
        self.config.kind
    }

    /// Copy of the momentum vector or squared-gradient average.
    pub fn accumulator(&self) -> Vec<f32> {
        match &self.acc {
            Accumulator::Momentum(v) | Accumulator::Private(v) => v.clone(),
            Accumulator::Shared(g) => g.to_vec(),
        }
    }

    /// Applies one update computed from `grad` to `params` with rate `eta`.
    pub fn step(&mut self, params: &AtomicF32Vec, grad: &[f32], eta: f32) -> Result<()> {
        if grad.len() != params.len() {
            return config_err(format!(
                "gradient has {} entries, parameters have {}",
                grad.len(),
                params.len()
            ));
        }
        let cfg = &self.config;
        match &mut self.acc {
            Accumulator::Momentum(m) => momentum_sgd_step(m, params, grad, cfg.momentum, eta),
            Accumulator::Private(g) => {
                let (a, b) = (cfg.decay, 1.0 - cfg.decay);
                for (gi, &d) in g.iter_mut().zip(grad) {
                    *gi = a * *gi + b * (d * d);
                }
                for (i, &d) in grad.iter().enumerate() {
                    rms_apply(params, i, d, g[i], eta, cfg.epsilon);
                }
            }
            Accumulator::Shared(g) => {
                let (a, b) = (cfg.decay, 1.0 - cfg.decay);
                for (i, &d) in grad.iter().enumerate() {
                    g.update(i, |gi| a * gi + b * (d * d));
                }
                for (i, &d) in grad.iter().enumerate() {
                    rms_apply(params, i, d, g.get(i), eta, cfg.epsilon);
                }
            }
        }
        Ok(())
    }
}

fn momentum_sgd_step(m: &mut [f32], params: &AtomicF32Vec, grad: &[f32], alpha: f32, eta: f32) {
    let b = 1.0 - alpha;
    for (i, (mi, &d)) in m.iter_mut().zip(grad).enumerate() {
        *mi = alpha * *mi + b * d;
        let delta = -(eta * *mi);
        if delta != 0.0 {
            params.add(i, delta);
        }
    }
}

#[inline]
fn rms_apply(params: &AtomicF32Vec, i: usize, d: f32, g: f32, eta: f32, eps: f32) {
    let delta = -(eta * d / (g + eps).sqrt());
    if delta != 0.0 {
        params.add(i, delta);
    }
}

/// Builds per-thread optimizer handles for one parameter vector. For shared
/// RMSProp the factory owns the single process-wide `g`.
#[derive(Debug, Clone)]
pub struct OptimizerFactory {
    config: OptimizerConfig,
    len: usize,
    shared_g: Option<Arc<AtomicF32Vec>>,
}

impl OptimizerFactory {
    pub fn new(config: OptimizerConfig, len: usize) -> Result<Self> {
        config.validate()?;
        let shared_g = (config.kind == OptimizerKind::SharedRmsprop).then(|| Arc::new(AtomicF32Vec::zeros(len)));
        Ok(Self { config, len, shared_g })
    }

    pub fn make(&self) -> Optimizer {
        let acc = match self.config.kind {
            OptimizerKind::MomentumSgd => Accumulator::Momentum(vec![0.0; self.len]),
            OptimizerKind::Rmsprop => Accumulator::Private(vec![0.0; self.len]),
            OptimizerKind::SharedRmsprop => Accumulator::Shared(Arc::clone(self.shared_g.as_ref().unwrap())),
        };
        Optimizer {
            config: self.config.clone(),
            acc,
        }
    }

    pub fn shared_statistics(&self) -> Option<Vec<f32>> {
        self.shared_g.as_ref().map(|g| g.to_vec())
    }
}

/// Convenience for a single handle; `kind` is parsed like the CLI flag.
pub fn make_optimizer(kind: &str, config: &OptimizerConfig, len: usize) -> Result<Optimizer> {
    let config = OptimizerConfig {
        kind: kind.parse()?,
        ..config.clone()
    };
    Ok(OptimizerFactory::new(config, len)?.make())
}

/// Scales `grad` in place so its global L2 norm is at most `max_norm`.
pub fn clip_global_norm(grad: &mut [f32], max_norm: f32) -> f32 {
    let norm = grad.iter().map(|&g| f64::from(g) * f64::from(g)).sum::<f64>().sqrt() as f32;
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

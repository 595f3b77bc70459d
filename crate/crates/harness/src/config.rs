//! Run configuration and its TOML form.
//!
//! Values are layered: built-in defaults, then command-line flags, then a
//! config file. Later layers win key by key.

use std::fs;
use std::path::{Path, PathBuf};

use asyncrl_core::algo::{Algorithm, HyperParams};
use asyncrl_core::env::{ActionSpace, EnvConfig};
use asyncrl_core::nn::Architecture;
use asyncrl_core::optim::{LearningRateSchedule, OptimizerConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{HarnessError, Result};

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Algorithm,
    pub threads: usize,
    /// Global frame budget `T_max`.
    pub total_frames: u64,
    /// Initial learning rate.
    pub lr: f64,
    /// Anneal the learning rate linearly to zero over `total_frames`.
    pub anneal_lr: bool,
    pub seed: u64,
    /// Frames between evaluation points.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub out_dir: PathBuf,
    /// One thread, evaluation at exact frame counts, logical clock.
    pub deterministic: bool,
    pub hidden: Vec<usize>,
    pub env: EnvConfig,
    pub hp: HyperParams,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algo: Algorithm::Q1,
            threads: 1,
            total_frames: 100_000,
            lr: 1e-3,
            anneal_lr: true,
            seed: 0,
            eval_interval: 10_000,
            eval_episodes: 10,
            out_dir: PathBuf::from("runs/default"),
            deterministic: false,
            hidden: vec![64],
            env: EnvConfig::chain(),
            hp: HyperParams::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return config_err("threads must be at least 1");
        }
        if self.total_frames == 0 {
            return config_err("total frames must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return config_err(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.eval_interval == 0 {
            return config_err("eval interval must be positive");
        }
        if self.eval_episodes == 0 {
            return config_err("eval episodes must be positive");
        }
        if self.seed > i64::MAX as u64 {
            return config_err("seed must fit in a signed 64-bit integer");
        }
        if self.hidden.contains(&0) {
            return config_err("hidden layer widths must be positive");
        }
        self.hp.validate()?;
        self.optimizer.validate()?;
        self.architecture()?;
        Ok(())
    }

    /// Thread count actually used.
    pub fn effective_threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.threads
        }
    }

    pub fn lr_schedule(&self) -> LearningRateSchedule {
        if self.anneal_lr {
            LearningRateSchedule::linear(self.lr, self.total_frames)
        } else {
            LearningRateSchedule::constant(self.lr)
        }
    }

    /// Network shape implied by the algorithm and the environment.
    pub fn architecture(&self) -> Result<Architecture> {
        let env = self.env.build()?;
        let input = env.observation_dim();
        let arch = match (self.algo, env.action_space()) {
            (Algorithm::Q1 | Algorithm::Sarsa1 | Algorithm::Qn, ActionSpace::Discrete(n)) => {
                Architecture::q(input, &self.hidden, n)?
            }
            (Algorithm::A3c, ActionSpace::Discrete(n)) => Architecture::actor_critic(input, &self.hidden, n)?,
            (Algorithm::A3cContinuous, ActionSpace::Continuous(d)) => Architecture::gaussian(input, &self.hidden, d)?,
            (algo, space) => return config_err(format!("{algo} does not support {} ({space:?})", self.env.name())),
        };
        Ok(arch)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(format!("cannot render config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("invalid config file: {e}")))?;
        Self::from_layers(&[table])
    }

    /// Defaults overlaid by each table in turn.
    pub fn from_layers(layers: &[Table]) -> Result<Self> {
        let mut merged = defaults_table()?;
        for layer in layers {
            merge(&mut merged, layer);
        }
        let cfg: Self = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("invalid config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| HarnessError::io(path, e))
    }
}

/// Reads a config file into a raw table for layering.
pub fn read_layer(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
    text.parse()
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

fn defaults_table() -> Result<Table> {
    let text = RunConfig::default().to_toml()?;
    text.parse()
        .map_err(|e| HarnessError::Config(format!("default config does not parse: {e}")))
}

/// Deep merge of `top` into `base`. An environment table naming a different
/// `kind` replaces the old one instead of mixing fields.
pub fn merge(base: &mut Table, top: &Table) {
    for (key, value) in top {
        match (base.get_mut(key), value) {
            (Some(Value::Table(b)), Value::Table(t)) if !(key == "env" && kind_changes(b, t)) => merge(b, t),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

fn kind_changes(base: &Table, top: &Table) -> bool {
    match (base.get("kind"), top.get("kind")) {
        (Some(a), Some(b)) => a != b,
        _ => false,
    }
}

/// Inserts `value` at a dotted `path` such as `hp.t_max`.
pub fn set_path(table: &mut Table, path: &str, value: Value) {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("non-empty path");
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("path prefix is a table");
    }
    cur.insert(last.to_string(), value);
}

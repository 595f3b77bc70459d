//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

use crate::bench::{bench_throughput, bench_time_to_reference, render_scaling, render_throughput};
use crate::config::{read_layer, set_path, RunConfig};
use crate::error::{HarnessError, Result};
use crate::eval::{evaluate_checkpoint, EvalPolicy};
use crate::sweep::{render_table, sweep};
use crate::train::{train, MonotonicClock};

#[derive(Debug, Parser)]
#[command(name = "asyncrl", version, about = "Asynchronous actor-learner training harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration and write metrics and a checkpoint.
    Train(RunArgs),
    /// Train once per log-uniformly sampled learning rate.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-4)]
        lr_low: f64,
        #[arg(long, default_value_t = 1e-2)]
        lr_high: f64,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Measure speedup over one thread.
    BenchScaling {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        thread_counts: Vec<usize>,
        /// Evaluation score that ends each timed run.
        #[arg(long, required_unless_present = "throughput")]
        reference_score: Option<f64>,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        /// Report raw steps per second instead of time to the reference.
        #[arg(long)]
        throughput: bool,
    },
    /// Evaluate a checkpoint with the greedy policy.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Ignore the checkpoint's policy and act uniformly at random.
        #[arg(long)]
        random: bool,
    },
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML file; its values override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// q1, sarsa1, qn, a3c or a3c_continuous.
    #[arg(long)]
    pub algo: Option<String>,
    /// chain, grid-maze or point-mass.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub total_frames: Option<u64>,
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// sgd, rmsprop or shared-rmsprop.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub target_interval: Option<u64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eval_interval: Option<u64>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Hidden layer widths, comma separated; empty for a linear network.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub hidden: Option<Vec<usize>>,
    /// One thread, evaluation at exact frame counts, logical clock.
    #[arg(long)]
    pub deterministic: bool,
}

fn int(x: u64) -> Result<Value> {
    i64::try_from(x)
        .map(Value::Integer)
        .map_err(|_| HarnessError::Config(format!("{x} is too large")))
}

impl RunArgs {
    /// Flags given on the command line, as a config layer.
    pub fn flag_layer(&self) -> Result<Table> {
        let mut t = Table::new();
        if let Some(a) = &self.algo {
            set_path(&mut t, "algo", Value::String(a.replace('-', "_")));
        }
        if let Some(e) = &self.env {
            let env = asyncrl_core::env::EnvConfig::from_name(e)?;
            let v = Value::try_from(&env).map_err(|e| HarnessError::Config(e.to_string()))?;
            set_path(&mut t, "env", v);
        }
        if let Some(o) = &self.optimizer {
            let kind: asyncrl_core::optim::OptimizerKind = o.parse()?;
            set_path(&mut t, "optimizer.kind", Value::String(kind.to_string()));
        }
        let ints = [
            ("threads", self.threads.map(|x| x as u64)),
            ("total_frames", self.total_frames),
            ("hp.t_max", self.t_max.map(|x| x as u64)),
            ("hp.target_interval", self.target_interval),
            ("seed", self.seed),
            ("eval_interval", self.eval_interval),
            ("eval_episodes", self.eval_episodes.map(|x| x as u64)),
        ];
        for (k, v) in ints {
            if let Some(v) = v {
                set_path(&mut t, k, int(v)?);
            }
        }
        let floats = [
            ("hp.gamma", self.gamma),
            ("hp.beta", self.beta),
            ("lr", self.lr),
            ("hp.clip_norm", self.clip_norm),
        ];
        for (k, v) in floats {
            if let Some(v) = v {
                set_path(&mut t, k, Value::Float(v));
            }
        }
        if let Some(o) = &self.out {
            set_path(&mut t, "out_dir", Value::String(o.to_string_lossy().into_owned()));
        }
        if let Some(h) = &self.hidden {
            let arr = h.iter().map(|&w| int(w as u64)).collect::<Result<Vec<_>>>()?;
            set_path(&mut t, "hidden", Value::Array(arr));
        }
        if self.deterministic {
            set_path(&mut t, "deterministic", Value::Boolean(true));
        }
        Ok(t)
    }

    /// Defaults, then flags, then the config file.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut layers = vec![self.flag_layer()?];
        if let Some(path) = &self.config {
            layers.push(read_layer(path)?);
        }
        RunConfig::from_layers(&layers)
    }
}

/// Runs a parsed command and returns what should be printed.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            let out = train(&cfg)?;
            Ok(format!(
                "{}\ncheckpoint: {}\n",
                out.final_record().to_line(),
                out.checkpoint.display()
            ))
        }
        Command::Sweep {
            run,
            lr_low,
            lr_high,
            samples,
        } => {
            let cfg = run.resolve()?;
            Ok(render_table(&sweep(&cfg, samples, lr_low, lr_high)?))
        }
        Command::BenchScaling {
            run,
            thread_counts,
            reference_score,
            seeds,
            throughput,
        } => {
            let cfg = run.resolve()?;
            let clock = MonotonicClock::new();
            if throughput {
                Ok(render_throughput(&bench_throughput(
                    &cfg,
                    &thread_counts,
                    seeds,
                    &clock,
                )?))
            } else {
                let reference = reference_score.expect("clap enforces the reference score");
                let rows = bench_time_to_reference(&cfg, &thread_counts, reference, seeds, &clock)?;
                Ok(render_scaling(&rows, "seconds"))
            }
        }
        Command::Eval {
            run,
            checkpoint,
            random,
        } => {
            let cfg = run.resolve()?;
            let policy = if random { EvalPolicy::Random } else { EvalPolicy::Greedy };
            let r = evaluate_checkpoint(&cfg, &checkpoint, cfg.eval_episodes, cfg.seed, policy)?;
            Ok(format!(
                "{}\n",
                serde_json::json!({ "episodes": r.scores.len(), "mean": r.mean, "std": r.std })
            ))
        }
    }
}

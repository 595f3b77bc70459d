//! Training runs: actor-learner threads plus an evaluator.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use asyncrl_core::algo::{ActorLearner, SharedContext, ThreadStats};
use asyncrl_core::nn::Architecture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::eval::{evaluate_params, EvalPolicy};
use crate::metrics::{MetricRecord, MetricsWriter};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "final.ckpt";
pub const CONFIG_FILE: &str = "run.toml";

/// Seconds since some fixed origin.
pub trait Clock: Send + Sync {
    fn seconds(&self) -> f64;
}

#[derive(Debug)]
pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Hand-driven clock for tests.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn set(&self, seconds: f64) {
        self.0.store(seconds.to_bits(), Ordering::SeqCst);
    }

    pub fn advance(&self, seconds: f64) {
        self.set(self.seconds() + seconds);
    }
}

impl Clock for ManualClock {
    fn seconds(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::SeqCst))
    }
}

/// Seed used for every evaluation of a run, so scores compare like with
/// like.
pub fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_E7A1_0000_0000
}

pub fn run_id(cfg: &RunConfig) -> String {
    format!(
        "{}-{}-t{}-s{}",
        cfg.algo,
        cfg.env.name(),
        cfg.effective_threads(),
        cfg.seed
    )
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub run_id: String,
    pub records: Vec<MetricRecord>,
    pub frames: u64,
    pub thread_stats: Vec<ThreadStats>,
    pub theta: Vec<f32>,
    pub theta_v: Vec<f32>,
    pub arch: Architecture,
    pub checkpoint: PathBuf,
    /// Clock reading of the first evaluation scoring at least the stop
    /// score, if one was set and reached.
    pub reached_at: Option<f64>,
}

impl TrainOutcome {
    pub fn final_record(&self) -> &MetricRecord {
        self.records.last().expect("every run emits at least one record")
    }
}

#[derive(Clone, Copy)]
pub struct TrainOptions<'a> {
    pub clock: &'a dyn Clock,
    /// Stop all threads once an evaluation reaches this score.
    pub stop_at_score: Option<f64>,
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let clock = MonotonicClock::new();
    train_with(
        cfg,
        TrainOptions {
            clock: &clock,
            stop_at_score: None,
        },
    )
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    ctx: &'a SharedContext,
    writer: MetricsWriter,
    records: Vec<MetricRecord>,
    run_id: String,
    start: f64,
    opts: TrainOptions<'a>,
    reached_at: Option<f64>,
}

impl Recorder<'_> {
    /// Evaluates the current parameters and emits a record. Returns true
    /// when the stop score has been reached.
    fn record(&mut self, frames: u64) -> Result<bool> {
        if self.records.last().is_some_and(|r| frames <= r.global_frames) {
            return Ok(false);
        }
        let wall = if self.cfg.deterministic {
            self.records.len() as f64
        } else {
            (self.opts.clock.seconds() - self.start).max(0.0)
        };
        let theta = self.ctx.params.snapshot();
        let theta_v = self.ctx.params.snapshot_v();
        let res = evaluate_params(
            &self.ctx.arch,
            &theta,
            &theta_v,
            &self.cfg.env,
            self.cfg.eval_episodes,
            eval_seed(self.cfg.seed),
            EvalPolicy::Greedy,
        )?;
        let rec = MetricRecord {
            wall_clock_seconds: wall,
            global_frames: frames,
            eval_mean_score: res.mean,
            eval_std: res.std,
            current_eta: self.ctx.lr.eta(frames),
            thread_count: self.cfg.effective_threads(),
            run_id: self.run_id.clone(),
        };
        self.writer.send(rec.clone())?;
        self.records.push(rec);
        let hit = self.opts.stop_at_score.is_some_and(|s| res.mean >= s);
        if hit && self.reached_at.is_none() {
            self.reached_at = Some(wall);
        }
        Ok(hit)
    }
}

/// Runs training as configured, writing `metrics.jsonl`, `run.toml` and
/// `final.ckpt` into the output directory.
pub fn train_with(cfg: &RunConfig, opts: TrainOptions<'_>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let arch = cfg.architecture()?;
    let (theta0, theta_v0) = arch.init_params(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let ctx = SharedContext::new(
        cfg.algo,
        arch.clone(),
        cfg.hp.clone(),
        cfg.optimizer.clone(),
        cfg.lr_schedule(),
        &theta0,
        &theta_v0,
    )?;
    let n_threads = cfg.effective_threads();
    let mut learners = Vec::with_capacity(n_threads);
    for id in 0..n_threads {
        learners.push(ActorLearner::new(&ctx, cfg.env.build()?, id, cfg.seed)?);
    }

    fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    cfg.save(&cfg.out_dir.join(CONFIG_FILE))?;
    let mut rec = Recorder {
        cfg,
        ctx: &ctx,
        writer: MetricsWriter::create(&cfg.out_dir.join(METRICS_FILE))?,
        records: Vec::new(),
        run_id: run_id(cfg),
        start: opts.clock.seconds(),
        opts,
        reached_at: None,
    };

    let total = cfg.total_frames;
    let interval = cfg.eval_interval;
    let mut fault: Option<HarnessError> = None;
    let mut stats = Vec::with_capacity(n_threads);

    if rec.record(0)? {
        ctx.stop.raise();
    }
    if cfg.deterministic {
        let mut learner = learners.pop().expect("one learner");
        let mut next = interval.min(total);
        while !ctx.stop.is_raised() {
            if let Err(e) = learner.run_until(&ctx, next) {
                fault = Some(e.into());
                break;
            }
            let frames = ctx.counter.get();
            if rec.record(frames)? {
                break;
            }
            if frames >= total {
                break;
            }
            next = (frames / interval + 1).saturating_mul(interval).min(total);
        }
        stats.push(learner.into_stats());
    } else {
        let ctx = &ctx;
        thread::scope(|s| -> Result<()> {
            let handles: Vec<_> = learners
                .into_iter()
                .map(|mut l| {
                    s.spawn(move || {
                        let r = l.run_until(ctx, total);
                        (r, l.into_stats())
                    })
                })
                .collect();
            let mut next = interval;
            let mut eval_err = None;
            while !handles.iter().all(|h| h.is_finished()) {
                let frames = ctx.counter.get();
                if frames >= next && frames < total && !ctx.stop.is_raised() {
                    match rec.record(frames) {
                        Ok(true) => ctx.stop.raise(),
                        Ok(false) => {}
                        Err(e) => {
                            ctx.stop.raise();
                            eval_err = Some(e);
                        }
                    }
                    next = (frames / interval + 1) * interval;
                } else {
                    thread::sleep(Duration::from_millis(1));
                }
            }
            for h in handles {
                match h.join() {
                    Ok((r, st)) => {
                        if let Err(e) = r {
                            fault.get_or_insert(e.into());
                        }
                        stats.push(st);
                    }
                    Err(_) => {
                        fault.get_or_insert(HarnessError::Runtime("actor-learner thread panicked".into()));
                    }
                }
            }
            eval_err.map_or(Ok(()), Err)
        })?;
        if fault.is_none() && rec.reached_at.is_none() {
            rec.record(ctx.counter.get())?;
        }
    }

    let theta = ctx.params.snapshot();
    let theta_v = ctx.params.snapshot_v();
    let checkpoint = cfg.out_dir.join(CHECKPOINT_FILE);
    Checkpoint::new(&arch, theta.clone(), theta_v.clone()).save(&checkpoint)?;
    let Recorder {
        writer,
        records,
        run_id,
        reached_at,
        ..
    } = rec;
    writer.finish()?;
    if let Some(e) = fault {
        return Err(match e {
            HarnessError::Config(m) => HarnessError::Runtime(m),
            other => other,
        });
    }
    Ok(TrainOutcome {
        run_id,
        records,
        frames: ctx.counter.get(),
        thread_stats: stats,
        theta,
        theta_v,
        arch,
        checkpoint,
        reached_at,
    })
}

/// Environment steps per second with `cfg.threads` learners and no
/// evaluation, over `cfg.total_frames` frames.
pub fn measure_throughput(cfg: &RunConfig, clock: &dyn Clock) -> Result<f64> {
    cfg.validate()?;
    let arch = cfg.architecture()?;
    let (theta0, theta_v0) = arch.init_params(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let ctx = SharedContext::new(
        cfg.algo,
        arch,
        cfg.hp.clone(),
        cfg.optimizer.clone(),
        cfg.lr_schedule(),
        &theta0,
        &theta_v0,
    )?;
    let mut learners = Vec::new();
    for id in 0..cfg.threads {
        learners.push(ActorLearner::new(&ctx, cfg.env.build()?, id, cfg.seed)?);
    }
    let start = clock.seconds();
    let results: Vec<_> = thread::scope(|s| {
        let ctx = &ctx;
        let handles: Vec<_> = learners
            .into_iter()
            .map(|mut l| s.spawn(move || l.run_until(ctx, cfg.total_frames)))
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });
    let elapsed = clock.seconds() - start;
    for r in results {
        match r {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(HarnessError::Runtime(e.to_string())),
            Err(_) => return Err(HarnessError::Runtime("actor-learner thread panicked".into())),
        }
    }
    if elapsed <= 0.0 {
        return Err(HarnessError::Runtime("clock did not advance".into()));
    }
    Ok(ctx.counter.get() as f64 / elapsed)
}

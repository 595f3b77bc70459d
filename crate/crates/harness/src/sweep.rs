//! Learning-rate sweeps.

use std::fmt::Write as _;
use std::fs;

use asyncrl_core::env::EnvConfig;
use asyncrl_core::nn::Architecture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::eval::chain_q_report;
use crate::train::train;

pub const SWEEP_FILE: &str = "sweep.tsv";

/// `exp(U (ln high - ln low) + ln low)` for `n` uniform draws `U`.
pub fn log_uniform_samples<R: Rng + ?Sized>(n: usize, low: f64, high: f64, rng: &mut R) -> Vec<f64> {
    let (a, b) = (low.ln(), high.ln());
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (u * (b - a) + a).exp().clamp(low, high)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// 1-based position after sorting by score, best first.
    pub rank: usize,
    pub run: usize,
    pub eta0: f64,
    pub seed: u64,
    pub final_score: f64,
    /// Whether the final greedy policy is optimal, where an exact model
    /// exists to check against.
    pub optimal_policy: Option<bool>,
}

pub fn render_table(rows: &[SweepRow]) -> String {
    let mut s = String::from("rank\trun\teta0\tseed\tfinal_score\toptimal_policy\n");
    for r in rows {
        let opt = r.optimal_policy.map_or("-".to_string(), |b| b.to_string());
        writeln!(
            s,
            "{}\t{}\t{:e}\t{}\t{}\t{}",
            r.rank, r.run, r.eta0, r.seed, r.final_score, opt
        )
        .unwrap();
    }
    s
}

/// One independent run per sampled learning rate; rows come back sorted
/// by final score, best first. The table is also written to
/// `<out_dir>/sweep.tsv`.
pub fn sweep(base: &RunConfig, samples: usize, eta_low: f64, eta_high: f64) -> Result<Vec<SweepRow>> {
    if samples == 0 {
        return Err(HarnessError::Config("a sweep needs at least one sample".into()));
    }
    if !(eta_low > 0.0 && eta_low <= eta_high && eta_high.is_finite()) {
        return Err(HarnessError::Config(format!(
            "need 0 < lr-low <= lr-high, got {eta_low} and {eta_high}"
        )));
    }
    base.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    let etas = log_uniform_samples(samples, eta_low, eta_high, &mut rng);
    let mut rows = Vec::with_capacity(samples);
    for (i, &eta) in etas.iter().enumerate() {
        let cfg = RunConfig {
            lr: eta,
            seed: (base.seed + i as u64 + 1) & i64::MAX as u64,
            out_dir: base.out_dir.join(format!("run-{i:03}")),
            ..base.clone()
        };
        let out = train(&cfg)?;
        let optimal_policy = match (&out.arch, &cfg.env) {
            (Architecture::Q(_), EnvConfig::Chain { .. }) => {
                Some(chain_q_report(&out.arch, &out.theta, &cfg.env, cfg.hp.gamma)?.greedy_optimal)
            }
            _ => None,
        };
        rows.push(SweepRow {
            rank: 0,
            run: i,
            eta0: eta,
            seed: cfg.seed,
            final_score: out.final_record().eval_mean_score,
            optimal_policy,
        });
    }
    rows.sort_by(|a, b| b.final_score.total_cmp(&a.final_score).then(a.run.cmp(&b.run)));
    for (k, r) in rows.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    fs::create_dir_all(&base.out_dir).map_err(|e| HarnessError::io(&base.out_dir, e))?;
    let path = base.out_dir.join(SWEEP_FILE);
    fs::write(&path, render_table(&rows)).map_err(|e| HarnessError::io(&path, e))?;
    Ok(rows)
}

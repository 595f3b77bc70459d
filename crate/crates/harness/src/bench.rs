//! Thread-scaling benchmarks.
//!
//! Two measurements: time until a fixed evaluation score is first reached,
//! and raw environment steps per second. Speedups are relative to one
//! thread.

use std::fmt::Write as _;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::train::{measure_throughput, train_with, Clock, TrainOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub threads: usize,
    /// One entry per seed; `None` when the reference was never reached.
    pub times: Vec<Option<f64>>,
    /// Median over the seeds that reached the reference.
    pub median: Option<f64>,
    /// `median(1 thread) / median(n threads)`.
    pub speedup: Option<f64>,
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Builds the speedup table from raw times. The one-thread speedup is
/// exactly 1 whenever that entry was reached.
pub fn speedup_table(entries: Vec<(usize, Vec<Option<f64>>)>) -> Vec<ScalingRow> {
    let mut rows: Vec<ScalingRow> = entries
        .into_iter()
        .map(|(threads, times)| {
            let reached: Vec<f64> = times.iter().flatten().copied().collect();
            ScalingRow {
                threads,
                median: median(&reached),
                times,
                speedup: None,
            }
        })
        .collect();
    let base = rows.iter().find(|r| r.threads == 1).and_then(|r| r.median);
    for r in &mut rows {
        r.speedup = match (base, r.median) {
            _ if r.threads == 1 && r.median.is_some() => Some(1.0),
            (Some(b), Some(m)) if m > 0.0 => Some(b / m),
            _ => None,
        };
    }
    rows
}

pub fn render_scaling(rows: &[ScalingRow], unit: &str) -> String {
    let mut s = format!("threads\tmedian_{unit}\tspeedup\truns\n");
    for r in rows {
        let med = r.median.map_or("unreached".to_string(), |m| format!("{m:.4}"));
        let sp = r.speedup.map_or("-".to_string(), |x| format!("{x:.3}"));
        let runs: Vec<String> = r
            .times
            .iter()
            .map(|t| t.map_or("unreached".to_string(), |x| format!("{x:.4}")))
            .collect();
        writeln!(s, "{}\t{med}\t{sp}\t{}", r.threads, runs.join(",")).unwrap();
    }
    s
}

fn check_counts(thread_counts: &[usize], seeds: usize) -> Result<()> {
    if thread_counts.is_empty() || thread_counts.contains(&0) {
        return Err(HarnessError::Config("thread counts must be positive".into()));
    }
    if seeds == 0 {
        return Err(HarnessError::Config("need at least one seed".into()));
    }
    Ok(())
}

/// Time until greedy evaluation first scores `reference`, for each thread
/// count and seed.
pub fn bench_time_to_reference(
    base: &RunConfig,
    thread_counts: &[usize],
    reference: f64,
    seeds: usize,
    clock: &dyn Clock,
) -> Result<Vec<ScalingRow>> {
    check_counts(thread_counts, seeds)?;
    let mut entries = Vec::new();
    for &n in thread_counts {
        let mut times = Vec::with_capacity(seeds);
        for s in 0..seeds {
            let cfg = RunConfig {
                threads: n,
                deterministic: false,
                seed: base.seed + s as u64,
                out_dir: base.out_dir.join(format!("t{n}-s{s}")),
                ..base.clone()
            };
            let out = train_with(
                &cfg,
                TrainOptions {
                    clock,
                    stop_at_score: Some(reference),
                },
            )?;
            times.push(out.reached_at);
        }
        entries.push((n, times));
    }
    Ok(speedup_table(entries))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputRow {
    pub threads: usize,
    pub rates: Vec<f64>,
    /// Median steps per second.
    pub median: f64,
    /// Median rate relative to one thread.
    pub ratio: Option<f64>,
}

/// Steps per second for each thread count, `runs` repetitions each.
pub fn bench_throughput(
    base: &RunConfig,
    thread_counts: &[usize],
    runs: usize,
    clock: &dyn Clock,
) -> Result<Vec<ThroughputRow>> {
    check_counts(thread_counts, runs)?;
    let mut rows = Vec::new();
    for &n in thread_counts {
        let mut rates = Vec::with_capacity(runs);
        for r in 0..runs {
            let cfg = RunConfig {
                threads: n,
                deterministic: false,
                seed: base.seed + r as u64,
                ..base.clone()
            };
            rates.push(measure_throughput(&cfg, clock)?);
        }
        let median = median(&rates).expect("runs > 0");
        rows.push(ThroughputRow {
            threads: n,
            rates,
            median,
            ratio: None,
        });
    }
    let base_rate = rows.iter().find(|r| r.threads == 1).map(|r| r.median);
    for r in &mut rows {
        r.ratio = base_rate.map(|b| r.median / b);
    }
    Ok(rows)
}

pub fn render_throughput(rows: &[ThroughputRow]) -> String {
    let mut s = String::from("threads\tmedian_steps_per_s\tratio\truns\n");
    for r in rows {
        let ratio = r.ratio.map_or("-".to_string(), |x| format!("{x:.3}"));
        let runs: Vec<String> = r.rates.iter().map(|x| format!("{x:.1}")).collect();
        writeln!(s, "{}\t{:.1}\t{ratio}\t{}", r.threads, r.median, runs.join(",")).unwrap();
    }
    s
}

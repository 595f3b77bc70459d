//! Line-delimited JSON metrics.
//!
//! Each line is one object with exactly these keys, in this order:
//! `wall_clock_seconds`, `global_frames`, `eval_mean_score`, `eval_std`,
//! `current_eta`, `thread_count`, `run_id`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, SyncSender};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub wall_clock_seconds: f64,
    pub global_frames: u64,
    pub eval_mean_score: f64,
    pub eval_std: f64,
    pub current_eta: f64,
    pub thread_count: usize,
    pub run_id: String,
}

impl MetricRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("metric records always serialize")
    }
}

/// Parses one line, rejecting missing or extra keys, wrong types and
/// non-finite or out-of-range numbers.
pub fn parse_record_line(line: &str) -> std::result::Result<MetricRecord, String> {
    let rec: MetricRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let finite = [
        rec.wall_clock_seconds,
        rec.eval_mean_score,
        rec.eval_std,
        rec.current_eta,
    ];
    if finite.iter().any(|x| !x.is_finite()) {
        return Err("non-finite number".into());
    }
    if rec.wall_clock_seconds < 0.0 || rec.eval_std < 0.0 || rec.current_eta < 0.0 {
        return Err("negative time, deviation or learning rate".into());
    }
    if rec.thread_count == 0 {
        return Err("thread_count must be positive".into());
    }
    if rec.run_id.is_empty() {
        return Err("empty run_id".into());
    }
    Ok(rec)
}

/// Parses a whole metrics file and checks frames strictly increase.
pub fn parse_metrics(text: &str) -> std::result::Result<Vec<MetricRecord>, String> {
    let mut out: Vec<MetricRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let rec = parse_record_line(line).map_err(|e| format!("line {}: {e}", i + 1))?;
        if let Some(prev) = out.last() {
            if rec.global_frames <= prev.global_frames {
                return Err(format!("line {}: frames do not increase", i + 1));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Single writer thread fed by a bounded queue; every record becomes one
/// complete line.
pub struct MetricsWriter {
    path: PathBuf,
    tx: Option<SyncSender<MetricRecord>>,
    handle: Option<JoinHandle<io::Result<()>>>,
}

impl MetricsWriter {
    pub const QUEUE_DEPTH: usize = 64;

    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let (tx, rx) = sync_channel::<MetricRecord>(Self::QUEUE_DEPTH);
        let handle = std::thread::spawn(move || {
            let mut out = BufWriter::new(file);
            for rec in rx {
                writeln!(out, "{}", rec.to_line())?;
                out.flush()?;
            }
            out.flush()
        });
        Ok(Self {
            path: path.to_path_buf(),
            tx: Some(tx),
            handle: Some(handle),
        })
    }

    pub fn send(&self, rec: MetricRecord) -> Result<()> {
        self.tx
            .as_ref()
            .and_then(|tx| tx.send(rec).ok())
            .ok_or_else(|| HarnessError::Runtime(format!("metrics writer for {} stopped", self.path.display())))
    }

    /// Drains the queue and closes the file.
    pub fn finish(mut self) -> Result<()> {
        self.close()
    }

    fn close(&mut self) -> Result<()> {
        drop(self.tx.take());
        match self.handle.take().map(JoinHandle::join) {
            Some(Ok(Ok(()))) | None => Ok(()),
            Some(Ok(Err(e))) => Err(HarnessError::io(&self.path, e)),
            Some(Err(_)) => Err(HarnessError::Runtime("metrics writer panicked".into())),
        }
    }
}

impl Drop for MetricsWriter {
    fn drop(&mut self) {
        let _ = self.close();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(frames: u64) -> MetricRecord {
        MetricRecord {
            wall_clock_seconds: 1.5,
            global_frames: frames,
            eval_mean_score: 0.25,
            eval_std: 0.0,
            current_eta: 1e-3,
            thread_count: 2,
            run_id: "r".into(),
        }
    }

    #[test]
    fn line_round_trip() {
        let r = rec(10);
        assert_eq!(parse_record_line(&r.to_line()).unwrap(), r);
        assert!(r
            .to_line()
            .starts_with("{\"wall_clock_seconds\":1.5,\"global_frames\":10,"));
    }

    #[test]
    fn strict_schema() {
        let line = rec(1).to_line();
        assert!(parse_record_line(&line.replace("\"run_id\"", "\"extra\":1,\"run_id\"")).is_err());
        assert!(parse_record_line(&line.replace(",\"run_id\":\"r\"", "")).is_err());
        assert!(parse_record_line(&line.replace("\"eval_std\":0.0", "\"eval_std\":null")).is_err());
        assert!(parse_record_line(&line.replace("\"global_frames\":1", "\"global_frames\":-1")).is_err());
        assert!(parse_metrics(&format!("{}\n{}\n", rec(5).to_line(), rec(5).to_line())).is_err());
    }
}

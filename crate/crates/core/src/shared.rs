//! Parameter store shared by all actor-learner threads.
//!
//! Elements are `f32` values held in `AtomicU32` cells, so a single element
//! is never torn and an add is an indivisible read-modify-write. Nothing is
//! ordered or atomic across elements: a reader copying the vector while
//! writers are active sees, per element, some recently written value.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use crate::error::config_err;
use crate::Result;

/// Fixed-length vector of `f32` with per-element indivisible updates.
#[derive(Debug)]
pub struct AtomicF32Vec {
    cells: Box<[AtomicU32]>,
}

impl AtomicF32Vec {
    pub fn zeros(len: usize) -> Self {
        Self::from_slice(&vec![0.0; len])
    }

    pub fn from_slice(values: &[f32]) -> Self {
        Self {
            cells: values.iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.cells[i].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, i: usize, v: f32) {
        self.cells[i].store(v.to_bits(), Ordering::Relaxed);
    }

    /// Adds `delta` to element `i`; returns the new value.
    #[inline]
    pub fn add(&self, i: usize, delta: f32) -> f32 {
        self.update(i, |x| x + delta)
    }

    /// Replaces element `i` with `f(old)` in one compare-and-swap loop and
    /// returns the value that was stored.
    #[inline]
    pub fn update(&self, i: usize, f: impl Fn(f32) -> f32) -> f32 {
        let cell = &self.cells[i];
        let mut cur = cell.load(Ordering::Relaxed);
        loop {
            let new = f(f32::from_bits(cur));
            match cell.compare_exchange_weak(cur, new.to_bits(), Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return new,
                Err(actual) => cur = actual,
            }
        }
    }

    pub fn copy_into(&self, out: &mut Vec<f32>) {
        out.clear();
        out.extend(self.cells.iter().map(|c| f32::from_bits(c.load(Ordering::Relaxed))));
    }

    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.len());
        self.copy_into(&mut v);
        v
    }

    /// Element-wise indivisible add of `delta`.
    pub fn add_slice(&self, delta: &[f32]) -> Result<()> {
        if delta.len() != self.len() {
            return config_err(format!(
                "update has {} entries, shared vector has {}",
                delta.len(),
                self.len()
            ));
        }
        for (i, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                self.add(i, d);
            }
        }
        Ok(())
    }
}

/// `theta` and the optional `theta_v`, shared by every thread.
#[derive(Debug, Clone)]
pub struct SharedParams {
    theta: Arc<AtomicF32Vec>,
    theta_v: Arc<AtomicF32Vec>,
}

impl SharedParams {
    /// Indivisible write granularity in bits.
    pub const ELEMENT_WIDTH: usize = 32;

    pub fn new(theta: &[f32], theta_v: &[f32]) -> Self {
        Self {
            theta: Arc::new(AtomicF32Vec::from_slice(theta)),
            theta_v: Arc::new(AtomicF32Vec::from_slice(theta_v)),
        }
    }

    pub fn theta(&self) -> &AtomicF32Vec {
        &self.theta
    }

    pub fn theta_v(&self) -> &AtomicF32Vec {
        &self.theta_v
    }

    /// Private copy `theta' = theta` (per-element freshness only).
    pub fn snapshot(&self) -> Vec<f32> {
        self.theta.to_vec()
    }

    pub fn snapshot_v(&self) -> Vec<f32> {
        self.theta_v.to_vec()
    }

    pub fn apply_update(&self, delta: &[f32]) -> Result<()> {
        self.theta.add_slice(delta)
    }

    pub fn apply_update_v(&self, delta: &[f32]) -> Result<()> {
        self.theta_v.add_slice(delta)
    }
}

/// A complete, immutable copy of `theta` plus its version.
#[derive(Debug)]
pub struct TargetParams {
    pub values: Vec<f32>,
    pub version: u64,
}

/// Periodically refreshed frozen copy of `theta`.
///
/// Refreshes swap in a whole new vector, so readers hold either the old or
/// the new snapshot, never a mixture.
#[derive(Debug)]
pub struct TargetSnapshot {
    current: RwLock<Arc<TargetParams>>,
    version: AtomicU64,
}

impl TargetSnapshot {
    pub fn new(initial: Vec<f32>) -> Self {
        Self {
            current: RwLock::new(Arc::new(TargetParams {
                values: initial,
                version: 0,
            })),
            version: AtomicU64::new(0),
        }
    }

    pub fn version(&self) -> u64 {
        self.version.load(Ordering::Acquire)
    }

    pub fn load(&self) -> Arc<TargetParams> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Returns the snapshot only if it is newer than `seen`.
    pub fn load_if_newer(&self, seen: u64) -> Option<Arc<TargetParams>> {
        (self.version() != seen).then(|| self.load())
    }

    /// Installs `values` as the new snapshot.
    pub fn replace(&self, values: Vec<f32>) {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let version = guard.version + 1;
        *guard = Arc::new(TargetParams { values, version });
        self.version.store(version, Ordering::Release);
    }

    /// `theta^- <- theta`.
    pub fn refresh_from(&self, shared: &SharedParams) {
        self.replace(shared.snapshot());
    }
}

/// True when moving the counter from `before` to `after` crosses a multiple
/// of `period`. The thread whose increment crosses the boundary refreshes.
pub fn crosses_period(before: u64, after: u64, period: u64) -> bool {
    period > 0 && before / period != after / period
}

/// Refreshes `target` from `shared` if the counter step crossed a multiple
/// of `period`; returns whether it did.
pub fn refresh_target(shared: &SharedParams, target: &TargetSnapshot, before: u64, after: u64, period: u64) -> bool {
    let hit = crosses_period(before, after, period);
    if hit {
        target.refresh_from(shared);
    }
    hit
}

/// Global frame counter `T`.
#[derive(Debug, Default)]
pub struct GlobalCounter {
    value: AtomicU64,
}

impl GlobalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.value.load(Ordering::Acquire)
    }

    /// Adds `by` and returns the post-increment value.
    pub fn increment(&self, by: u64) -> u64 {
        self.value.fetch_add(by, Ordering::AcqRel) + by
    }
}

/// Cooperative stop signal raised when any thread faults.
#[derive(Debug, Default)]
pub struct StopFlag(AtomicBool);

impl StopFlag {
    pub fn raise(&self) {
        self.0.store(true, Ordering::Release);
    }

    pub fn is_raised(&self) -> bool {
        self.0.load(Ordering::Acquire)
    }
}

//! Per-thread exploration: each thread draws a final epsilon once and
//! anneals toward it linearly from 1.
//!
//! Random-number use is fixed so serial runs can be replayed exactly:
//! * drawing the final epsilon consumes one `f64`;
//! * an epsilon-greedy choice consumes one `f64`, then either one
//!   `random_range(0..n)` for a random action or, only when several actions
//!   tie for the maximum, one `random_range(0..ties)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::config_err;
use crate::nn::Real;
use crate::Result;

/// Discrete distribution over final exploration rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSupport {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Default for EpsilonSupport {
    fn default() -> Self {
        Self {
            values: vec![0.1, 0.01, 0.5],
            probs: vec![0.4, 0.3, 0.3],
        }
    }
}

impl EpsilonSupport {
    pub fn single(value: f64) -> Self {
        Self {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.len() != self.probs.len() {
            return config_err("epsilon support needs matching, non-empty value and probability lists");
        }
        if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return config_err(format!("epsilon values must lie in [0, 1]: {:?}", self.values));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0)) {
            return config_err("epsilon probabilities must be non-negative");
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config_err(format!("epsilon probabilities sum to {total}, not 1"));
        }
        Ok(())
    }
}

/// Draws one final epsilon from `support`.
pub fn sample_epsilon_final<R: Rng + ?Sized>(support: &EpsilonSupport, rng: &mut R) -> Result<f64> {
    support.validate()?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (&v, &p) in support.values.iter().zip(&support.probs) {
        acc += p;
        if u < acc {
            return Ok(v);
        }
    }
    Ok(*support.values.last().unwrap())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationPolicy {
    pub epsilon_final: f64,
    pub anneal_frames: u64,
    pub thread_id: usize,
}

impl ExplorationPolicy {
    /// `1 + (eps_final - 1) * min(1, frame / anneal_frames)`
    pub fn epsilon_at(&self, frame: u64) -> f64 {
        let frac = if self.anneal_frames == 0 {
            1.0
        } else {
            (frame as f64 / self.anneal_frames as f64).min(1.0)
        };
        1.0 + (self.epsilon_final - 1.0) * frac
    }
}

/// Indices of all maximal entries (exact comparison).
pub fn argmax_set<F: Real>(values: &[F]) -> Vec<usize> {
    let best = values
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, v| if v > m { v } else { m });
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

/// Greedy choice; ties are broken uniformly with `rng`.
pub fn greedy_with_ties<F: Real, R: Rng + ?Sized>(values: &[F], rng: &mut R) -> usize {
    let ties = argmax_set(values);
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Epsilon-greedy action over `values`.
pub fn epsilon_greedy<F: Real, R: Rng + ?Sized>(values: &[F], epsilon: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..values.len())
    } else {
        greedy_with_ties(values, rng)
    }
}

/// Samples an index from a probability vector with one `f64` draw.
pub fn sample_categorical<F: Real, R: Rng + ?Sized>(probs: &[F], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64().unwrap();
        if u < acc {
            return i;
        }
    }
    // rounding left the cumulative sum just below 1
    probs.iter().rposition(|&p| p > F::zero()).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_support_always_same() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = EpsilonSupport::single(0.1);
        for _ in 0..100 {
            assert_eq!(sample_epsilon_final(&s, &mut rng).unwrap(), 0.1);
        }
    }

    #[test]
    fn default_support_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = EpsilonSupport::default();
        let mut counts = [0usize; 3];
        let n = 1_000_000;
        for _ in 0..n {
            let e = sample_epsilon_final(&s, &mut rng).unwrap();
            counts[s.values.iter().position(|&v| v == e).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip([0.4, 0.3, 0.3]) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = EpsilonSupport::default();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_epsilon_final(&s, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn bad_probabilities_rejected() {
        let s = EpsilonSupport {
            values: vec![0.1, 0.2],
            probs: vec![0.5, 0.6],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_epsilon_final(&s, &mut rng).is_err());
    }

    #[test]
    fn annealing_schedule() {
        let p = ExplorationPolicy {
            epsilon_final: 0.1,
            anneal_frames: 1000,
            thread_id: 0,
        };
        assert_eq!(p.epsilon_at(0), 1.0);
        assert!((p.epsilon_at(500) - 0.55).abs() < 1e-12);
        assert!((p.epsilon_at(1000) - 0.1).abs() < 1e-12);
        let q = ExplorationPolicy {
            epsilon_final: 0.01,
            ..p
        };
        assert!((q.epsilon_at(10_000) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn ties_are_spread_over_the_argmax_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[greedy_with_ties(&[1.0f32, 1.0, 0.5], &mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        assert!(counts[0] > 1300 && counts[1] > 1300);
    }

    #[test]
    fn categorical_matches_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = [0.2f64, 0.0, 0.8];
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[sample_categorical(&p, &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 1e5 - 0.2).abs() < 0.01);
    }
}

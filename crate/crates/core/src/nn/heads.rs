//! Output-head math: softmax policies, entropy, and the Gaussian head.

use super::Real;
use crate::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, z| if z > m { z } else { m });
    let mut out: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = out.iter().fold(F::zero(), |acc, &e| acc + e);
    for p in &mut out {
        *p = *p / sum;
    }
    out
}

/// `log softmax(logits)[index]` computed via log-sum-exp.
pub fn log_softmax_at<F: Real>(logits: &[F], index: usize) -> F {
    let max = logits
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, z| if z > m { z } else { m });
    let lse = logits.iter().fold(F::zero(), |acc, &z| acc + (z - max).exp()).ln() + max;
    logits[index] - lse
}

/// Entropy `-sum p log p` of a probability vector and its gradient with
/// respect to the logits that produced it.
///
/// `dH/dz_k = -p_k (log p_k + H)`; zero-probability entries contribute 0.
pub fn policy_entropy<F: Real>(probs: &[F]) -> (F, Vec<F>) {
    let plogp = |p: F| if p > F::zero() { p * p.ln() } else { F::zero() };
    let entropy = -probs.iter().fold(F::zero(), |acc, &p| acc + plogp(p));
    let grad = probs
        .iter()
        .map(|&p| {
            if p > F::zero() {
                -p * (p.ln() + entropy)
            } else {
                F::zero()
            }
        })
        .collect();
    (entropy, grad)
}

/// `log(1 + exp(x))` without overflow for large `|x|`.
pub fn softplus<F: Real>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Maps the raw network outputs to a mean and a positive variance.
pub fn gaussian_head<F: Real>(mu: &[F], raw_sigma: F) -> (Vec<F>, F) {
    (mu.to_vec(), softplus(raw_sigma))
}

fn two_pi<F: Real>() -> F {
    F::from(std::f64::consts::TAU).unwrap()
}

/// Log-density of `action` under `N(mu, sigma2 I)` and the differential
/// entropy `d/2 (log(2 pi sigma2) + 1)` of that distribution.
pub fn gaussian_logprob_and_entropy<F: Real>(mu: &[F], sigma2: F, action: &[F]) -> Result<(F, F)> {
    if !(sigma2 > F::zero()) {
        return Err(Error::Domain(format!("variance must be positive, got {:?}", sigma2)));
    }
    if mu.len() != action.len() {
        return Err(Error::Config(format!(
            "action has {} dims, mean has {}",
            action.len(),
            mu.len()
        )));
    }
    let half = F::from(0.5).unwrap();
    let dim = F::from(mu.len()).unwrap();
    let log_norm = (two_pi::<F>() * sigma2).ln();
    let sq = mu
        .iter()
        .zip(action)
        .fold(F::zero(), |acc, (&m, &a)| acc + (a - m) * (a - m));
    let logp = -half * dim * log_norm - sq / (F::from(2.0).unwrap() * sigma2);
    let entropy = half * dim * (log_norm + F::one());
    Ok((logp, entropy))
}

/// Partial derivatives of the Gaussian log-density with respect to the mean
/// and the variance: `(d logp / d mu, d logp / d sigma2)`.
pub fn gaussian_logprob_grads<F: Real>(mu: &[F], sigma2: F, action: &[F]) -> (Vec<F>, F) {
    let two = F::from(2.0).unwrap();
    let dmu: Vec<F> = mu.iter().zip(action).map(|(&m, &a)| (a - m) / sigma2).collect();
    let sq = mu
        .iter()
        .zip(action)
        .fold(F::zero(), |acc, (&m, &a)| acc + (a - m) * (a - m));
    let dim = F::from(mu.len()).unwrap();
    let dsigma2 = -dim / (two * sigma2) + sq / (two * sigma2 * sigma2);
    (dmu, dsigma2)
}

/// Derivative of the differential entropy with respect to the variance.
pub fn gaussian_entropy_grad<F: Real>(dim: usize, sigma2: F) -> F {
    F::from(dim).unwrap() / (F::from(2.0).unwrap() * sigma2)
}

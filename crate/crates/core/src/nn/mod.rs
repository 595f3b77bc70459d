//! Dense feedforward networks with hand-written forward and reverse passes.
//!
//! Parameters live in flat slices. For every layer the weights come first,
//! row-major with one row per output unit, followed by the biases. Hidden
//! layers use a rectifier; the last layer is linear and feeds a head.
//!
//! All routines are generic over [`Real`] so that training can run in `f32`
//! while gradient checks run the very same code in `f64`.

mod arch;
pub mod heads;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use arch::Architecture;
pub use heads::{
    gaussian_head, gaussian_logprob_and_entropy, log_softmax_at, policy_entropy, sigmoid, softmax, softplus,
};

use crate::error::config_err;
use crate::Result;

/// Scalar type usable by the network code.
pub trait Real: Float + FromPrimitive + Debug + Sum + Send + Sync + 'static {}
impl<T: Float + FromPrimitive + Debug + Sum + Send + Sync + 'static> Real for T {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// One linear output per action.
    QValues,
    /// Softmax over the last layer plus a linear scalar value head fed from
    /// the last hidden layer. The value head's parameters are kept in a
    /// separate vector.
    PolicyValueShared,
    /// Last layer is `[mu_0, .., mu_{d-1}, raw_sigma]`.
    GaussianPolicy,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    head: HeadKind,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, head: HeadKind) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return config_err("an MLP needs at least an input and an output layer");
        }
        if layer_sizes.contains(&0) {
            return config_err(format!("layer sizes must be positive: {layer_sizes:?}"));
        }
        if head == HeadKind::GaussianPolicy && *layer_sizes.last().unwrap() < 2 {
            return config_err("a Gaussian head needs at least one mean output and one variance output");
        }
        Ok(Self { layer_sizes, head })
    }

    /// `input -> hidden.. -> outputs`
    pub fn with_hidden(input: usize, hidden: &[usize], outputs: usize, head: HeadKind) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        Self::new(sizes, head)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of actions for discrete heads, action dimension for the
    /// Gaussian head.
    pub fn action_dim(&self) -> usize {
        match self.head {
            HeadKind::GaussianPolicy => self.output_dim() - 1,
            _ => self.output_dim(),
        }
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn last_hidden_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    /// Offset of layer `l`'s weights; its biases follow `out * in` later.
    fn layer_offset(&self, layer: usize) -> usize {
        self.layer_sizes
            .windows(2)
            .take(layer)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Length of the main parameter vector.
    pub fn param_count(&self) -> usize {
        self.layer_offset(self.num_layers())
    }

    /// Length of the separate value-head vector (zero unless the head is
    /// [`HeadKind::PolicyValueShared`]).
    pub fn value_param_count(&self) -> usize {
        match self.head {
            HeadKind::PolicyValueShared => self.last_hidden_dim() + 1,
            _ => 0,
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` for weights and biases of each layer.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f32>, Vec<f32>) {
        let mut theta = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let bound = 1.0 / (w[0] as f32).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                theta.push(rng.random_range(-bound..=bound));
            }
        }
        let bound = 1.0 / (self.last_hidden_dim() as f32).sqrt();
        let theta_v = (0..self.value_param_count())
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        (theta, theta_v)
    }

    fn check_params<F>(&self, params: &[F], value_params: &[F]) -> Result<()> {
        if params.len() != self.param_count() {
            return config_err(format!(
                "parameter vector has {} entries, the network needs {}",
                params.len(),
                self.param_count()
            ));
        }
        if value_params.len() != self.value_param_count() {
            return config_err(format!(
                "value parameter vector has {} entries, the network needs {}",
                value_params.len(),
                self.value_param_count()
            ));
        }
        Ok(())
    }
}

/// Raw outputs of one forward pass, interpreted by head kind.
#[derive(Clone, Debug, PartialEq)]
pub enum HeadOutput<F> {
    QValues(Vec<F>),
    PolicyValue { logits: Vec<F>, probs: Vec<F>, value: F },
    Gaussian { mu: Vec<F>, raw_sigma: F, sigma2: F },
}

impl<F: Real> HeadOutput<F> {
    pub fn q_values(&self) -> &[F] {
        match self {
            HeadOutput::QValues(q) => q,
            HeadOutput::PolicyValue { logits, .. } => logits,
            HeadOutput::Gaussian { mu, .. } => mu,
        }
    }
}

/// Pre-activations and activations of every layer for one input.
#[derive(Clone, Debug)]
pub struct ForwardCache<F> {
    /// `activations[0]` is the input; `activations[l]` the output of layer
    /// `l` after its nonlinearity (the last one is linear).
    activations: Vec<Vec<F>>,
    pre_activations: Vec<Vec<F>>,
}

impl<F: Real> ForwardCache<F> {
    pub fn input(&self) -> &[F] {
        &self.activations[0]
    }

    /// Features feeding the output layer (and the value head).
    pub fn last_hidden(&self) -> &[F] {
        &self.activations[self.activations.len() - 2]
    }

    pub fn output(&self) -> &[F] {
        self.activations.last().unwrap()
    }

    pub fn pre_activations(&self, layer: usize) -> &[F] {
        &self.pre_activations[layer]
    }
}

/// Gradients of a scalar loss with respect to the network outputs.
///
/// `head` is taken with respect to the last linear layer: Q-values, policy
/// logits, or `[mu.., raw_sigma]` (before the softplus). `value` is only
/// meaningful for [`HeadKind::PolicyValueShared`].
#[derive(Clone, Debug, PartialEq)]
pub struct OutputGrads<F> {
    pub head: Vec<F>,
    pub value: Option<F>,
}

fn dense<F: Real>(weights: &[F], bias: &[F], input: &[F], out: &mut Vec<F>) {
    let n_in = input.len();
    out.clear();
    out.extend(bias.iter().enumerate().map(|(j, &b)| {
        let row = &weights[j * n_in..(j + 1) * n_in];
        row.iter().zip(input).fold(b, |acc, (&w, &x)| acc + w * x)
    }));
}

/// Runs the network on `obs`.
pub fn forward<F: Real>(
    spec: &MlpSpec,
    params: &[F],
    value_params: &[F],
    obs: &[F],
) -> Result<(HeadOutput<F>, ForwardCache<F>)> {
    spec.check_params(params, value_params)?;
    if obs.len() != spec.input_dim() {
        return config_err(format!(
            "observation has {} entries, network input is {}",
            obs.len(),
            spec.input_dim()
        ));
    }
    let layers = spec.num_layers();
    let mut activations = Vec::with_capacity(layers + 1);
    let mut pre_activations = Vec::with_capacity(layers);
    activations.push(obs.to_vec());
    for l in 0..layers {
        let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let off = spec.layer_offset(l);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        let mut z = Vec::with_capacity(n_out);
        dense(w, b, &activations[l], &mut z);
        let a = if l + 1 < layers {
            z.iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect()
        } else {
            z.clone()
        };
        pre_activations.push(z);
        activations.push(a);
    }
    let cache = ForwardCache {
        activations,
        pre_activations,
    };
    let out = cache.output();
    let head = match spec.head {
        HeadKind::QValues => HeadOutput::QValues(out.to_vec()),
        HeadKind::PolicyValueShared => {
            let h = cache.last_hidden();
            let k = h.len();
            let value = h
                .iter()
                .zip(&value_params[..k])
                .fold(value_params[k], |acc, (&x, &w)| acc + w * x);
            HeadOutput::PolicyValue {
                logits: out.to_vec(),
                probs: softmax(out),
                value,
            }
        }
        HeadKind::GaussianPolicy => {
            let d = out.len() - 1;
            let (mu, sigma2) = gaussian_head(&out[..d], out[d]);
            HeadOutput::Gaussian {
                mu,
                raw_sigma: out[d],
                sigma2,
            }
        }
    };
    Ok((head, cache))
}

/// Adds the exact gradient of a scalar loss, given through `grads`, to
/// `buf` (main parameters) and `value_buf` (value-head parameters).
pub fn backward_accumulate<F: Real>(
    spec: &MlpSpec,
    params: &[F],
    value_params: &[F],
    cache: &ForwardCache<F>,
    grads: &OutputGrads<F>,
    buf: &mut [F],
    value_buf: &mut [F],
) -> Result<()> {
    spec.check_params(params, value_params)?;
    spec.check_params(buf, value_buf)?;
    if grads.head.len() != spec.output_dim() {
        return config_err(format!(
            "output gradient has {} entries, head has {}",
            grads.head.len(),
            spec.output_dim()
        ));
    }
    let value_grad = match (spec.head, grads.value) {
        (HeadKind::PolicyValueShared, v) => v.unwrap_or_else(F::zero),
        (_, None) => F::zero(),
        (_, Some(_)) => return config_err("value gradient given for a network without a value head"),
    };
    if value_grad == F::zero() && grads.head.iter().all(|&g| g == F::zero()) {
        return Ok(());
    }

    let layers = spec.num_layers();
    if value_grad != F::zero() {
        accumulate_value_head(cache, value_grad, value_buf);
    }

    let mut delta = grads.head.clone();
    for l in (0..layers).rev() {
        let (n_in, n_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let off = spec.layer_offset(l);
        let input = &cache.activations[l];
        {
            let (dw, db) = buf[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (j, &d) in delta.iter().enumerate() {
                if d == F::zero() {
                    continue;
                }
                db[j] = db[j] + d;
                for (g, &x) in dw[j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
                    *g = *g + d * x;
                }
            }
        }
        if l == 0 {
            break;
        }
        let w = &params[off..off + n_in * n_out];
        let mut prev = vec![F::zero(); n_in];
        for (j, &d) in delta.iter().enumerate() {
            if d == F::zero() {
                continue;
            }
            for (p, &wji) in prev.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                *p = *p + wji * d;
            }
        }
        if l == layers - 1 && value_grad != F::zero() {
            for (p, &wv) in prev.iter_mut().zip(&value_params[..n_in]) {
                *p = *p + wv * value_grad;
            }
        }
        let z = &cache.pre_activations[l - 1];
        for (p, &zi) in prev.iter_mut().zip(z) {
            if !(zi > F::zero()) {
                *p = F::zero();
            }
        }
        delta = prev;
    }
    Ok(())
}

/// Adds `grad * d V / d value_params` to `value_buf` without touching the
/// shared layers.
pub fn accumulate_value_head<F: Real>(cache: &ForwardCache<F>, grad: F, value_buf: &mut [F]) {
    let h = cache.last_hidden();
    let k = h.len();
    for (b, &x) in value_buf[..k].iter_mut().zip(h) {
        *b = *b + grad * x;
    }
    value_buf[k] = value_buf[k] + grad;
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<F: Real>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Converts a slice to another scalar type.
pub fn cast_vec<A: Real, B: Real>(xs: &[A]) -> Vec<B> {
    xs.iter().map(|&x| B::from(x).unwrap()).collect()
}

use super::Environment;
use crate::error::config_err;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub prob: f64,
    pub next: usize,
    pub reward: f64,
    pub terminal: bool,
}

/// Finite MDP with an explicit transition model.
pub trait TabularMdp {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn is_terminal(&self, state: usize) -> bool;
    fn transitions(&self, state: usize, action: usize) -> Vec<Transition>;
}

/// `q[s][a]`; rows of terminal states are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub q: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

impl QTable {
    pub fn value(&self, state: usize) -> f64 {
        self.q[state].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions attaining the maximum in `state` (within `tol`).
    pub fn greedy_actions(&self, state: usize, tol: f64) -> Vec<usize> {
        let v = self.value(state);
        (0..self.q[state].len())
            .filter(|&a| self.q[state][a] >= v - tol)
            .collect()
    }
}

const MAX_SWEEPS: usize = 1_000_000;

/// Iterates the Bellman optimality operator on Q until the max-norm
/// change between sweeps is at most `tol`.
pub fn value_iteration(mdp: &dyn TabularMdp, gamma: f64, tol: f64) -> Result<QTable> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return config_err(format!("gamma must be in (0, 1], got {gamma}"));
    }
    if !(tol > 0.0) {
        return config_err("tolerance must be positive");
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let model: Vec<Vec<Vec<Transition>>> = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| {
                    if mdp.is_terminal(s) {
                        Vec::new()
                    } else {
                        mdp.transitions(s, a)
                    }
                })
                .collect()
        })
        .collect();
    let mut q = vec![vec![0.0; na]; ns];
    for it in 1..=MAX_SWEEPS {
        let v: Vec<f64> = q
            .iter()
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let mut residual: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let new: f64 = model[s][a]
                    .iter()
                    .map(|t| t.prob * (t.reward + if t.terminal { 0.0 } else { gamma * v[t.next] }))
                    .sum();
                residual = residual.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if residual <= tol {
            return Ok(QTable {
                q,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::Domain(format!(
        "value iteration did not converge in {MAX_SWEEPS} sweeps"
    )))
}

/// [`value_iteration`] on an environment's exact model, if it has one.
pub fn value_iteration_for_env(env: &dyn Environment, gamma: f64, tol: f64) -> Result<QTable> {
    match env.as_tabular() {
        Some(mdp) => value_iteration(mdp, gamma, tol),
        None => Err(Error::Unsupported("environment has no enumerable model".into())),
    }
}

//! Gradient assembly for the four learners.
//!
//! Every function adds loss gradients into caller-owned buffers; the
//! optimizers subtract them. For the policy this means the buffer holds
//! `-(grad log pi * A + beta * grad H)`, so a descent step on it is an
//! ascent step on the regularized objective.
//!
//! Returns and advantages are constants with respect to the parameters
//! being differentiated: nothing flows through the bootstrap value or
//! through the baseline into the policy term.

use super::targets::{n_step_returns, one_step_q_target, one_step_sarsa_target};
use crate::env::Action;
use crate::error::config_err;
use crate::nn::heads::{gaussian_entropy_grad, gaussian_logprob_grads, sigmoid};
use crate::nn::{
    accumulate_value_head, backward_accumulate, forward, policy_entropy, Architecture, HeadOutput, MlpSpec,
    OutputGrads, Real,
};
use crate::Result;

/// A rollout segment of at most `t_max` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<F> {
    pub observations: Vec<Vec<F>>,
    pub actions: Vec<Action>,
    pub rewards: Vec<F>,
    /// Observation after the last action; bootstrapped from unless
    /// `terminal`.
    pub final_observation: Vec<F>,
    pub terminal: bool,
}

impl<F: Real> Trajectory<F> {
    pub fn new() -> Self {
        Self {
            observations: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            final_observation: Vec::new(),
            terminal: false,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, observation: Vec<F>, action: Action, reward: F) {
        self.observations.push(observation);
        self.actions.push(action);
        self.rewards.push(reward);
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.rewards.clear();
        self.final_observation.clear();
        self.terminal = false;
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return config_err("empty trajectory");
        }
        if self.observations.len() != self.len() || self.actions.len() != self.len() {
            return config_err("trajectory fields have different lengths");
        }
        if !self.terminal && self.final_observation.is_empty() {
            return config_err("non-terminal trajectory without a final observation");
        }
        Ok(())
    }
}

impl<F: Real> Default for Trajectory<F> {
    fn default() -> Self {
        Self::new()
    }
}

fn discrete(action: &Action, n: usize) -> Result<usize> {
    match *action {
        Action::Discrete(a) if a < n => Ok(a),
        ref other => config_err(format!("expected a discrete action below {n}, got {other:?}")),
    }
}

fn continuous<F: Real>(action: &Action, dim: usize) -> Result<Vec<F>> {
    match action {
        Action::Continuous(a) if a.len() == dim => Ok(a.iter().map(|&x| F::from(x).unwrap()).collect()),
        other => config_err(format!("expected a {dim}-dimensional continuous action, got {other:?}")),
    }
}

fn two<F: Real>() -> F {
    F::from(2.0).unwrap()
}

/// Which one-step target to regress toward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OneStepRule {
    QLearning,
    /// Sarsa with the action taken in the next state.
    Sarsa {
        next_action: usize,
    },
}

/// One transition `(s, a, r, s')` for the one-step learners.
#[derive(Clone, Debug, PartialEq)]
pub struct OneStepTransition<F> {
    pub observation: Vec<F>,
    pub action: usize,
    pub reward: F,
    pub next_observation: Vec<F>,
    pub terminal: bool,
}

/// Adds `d (y - Q(s, a; theta))^2 / d theta` to `buf`, with the target `y`
/// taken from the target network. Returns `y`.
pub fn one_step_gradient<F: Real>(
    spec: &MlpSpec,
    theta: &[F],
    target: &[F],
    tr: &OneStepTransition<F>,
    rule: OneStepRule,
    gamma: F,
    buf: &mut [F],
) -> Result<F> {
    let (out, cache) = forward(spec, theta, &[], &tr.observation)?;
    let q = out.q_values();
    if tr.action >= q.len() {
        return config_err(format!("action {} out of range", tr.action));
    }
    let y = if tr.terminal {
        tr.reward
    } else {
        let (next, _) = forward(spec, target, &[], &tr.next_observation)?;
        match rule {
            OneStepRule::QLearning => one_step_q_target(tr.reward, next.q_values(), false, gamma)?,
            OneStepRule::Sarsa { next_action } => {
                let qn = next.q_values();
                if next_action >= qn.len() {
                    return config_err(format!("next action {next_action} out of range"));
                }
                one_step_sarsa_target(tr.reward, qn[next_action], false, gamma)
            }
        }
    };
    let mut head = vec![F::zero(); q.len()];
    head[tr.action] = two::<F>() * (q[tr.action] - y);
    backward_accumulate(
        spec,
        theta,
        &[],
        &cache,
        &OutputGrads { head, value: None },
        buf,
        &mut [],
    )?;
    Ok(y)
}

/// Adds `sum_i d (R_i - Q(s_i, a_i; theta))^2 / d theta` to `buf`, where
/// the returns bootstrap from `max_a Q(s_t, a; target)` unless terminal.
/// Returns the n-step returns.
pub fn n_step_q_gradients<F: Real>(
    traj: &Trajectory<F>,
    theta: &[F],
    target: &[F],
    spec: &MlpSpec,
    gamma: F,
    buf: &mut [F],
) -> Result<Vec<F>> {
    traj.validate()?;
    let bootstrap = if traj.terminal {
        F::zero()
    } else {
        let (out, _) = forward(spec, target, &[], &traj.final_observation)?;
        out.q_values()
            .iter()
            .copied()
            .fold(F::neg_infinity(), |m, q| if q > m { q } else { m })
    };
    let returns = n_step_returns(&traj.rewards, bootstrap, gamma);
    let n_actions = spec.output_dim();
    for ((obs, action), &ret) in traj.observations.iter().zip(&traj.actions).zip(&returns) {
        let a = discrete(action, n_actions)?;
        let (out, cache) = forward(spec, theta, &[], obs)?;
        let mut head = vec![F::zero(); n_actions];
        head[a] = two::<F>() * (out.q_values()[a] - ret);
        backward_accumulate(
            spec,
            theta,
            &[],
            &cache,
            &OutputGrads { head, value: None },
            buf,
            &mut [],
        )?;
    }
    Ok(returns)
}

/// Per-step quantities of an actor-critic update.
#[derive(Clone, Debug, PartialEq)]
pub struct A3cStep<F> {
    pub returns: Vec<F>,
    pub values: Vec<F>,
    pub entropies: Vec<F>,
}

impl<F: Real> A3cStep<F> {
    pub fn advantages(&self) -> Vec<F> {
        self.returns.iter().zip(&self.values).map(|(&r, &v)| r - v).collect()
    }
}

/// Value estimate `V(obs)` for either actor-critic architecture.
pub fn state_value<F: Real>(arch: &Architecture, theta: &[F], theta_v: &[F], obs: &[F]) -> Result<F> {
    match arch {
        Architecture::ActorCritic(spec) => match forward(spec, theta, theta_v, obs)?.0 {
            HeadOutput::PolicyValue { value, .. } => Ok(value),
            _ => unreachable!("validated architecture"),
        },
        Architecture::Gaussian { value, .. } => Ok(forward(value, theta_v, &[], obs)?.0.q_values()[0]),
        Architecture::Q(_) => config_err("state values need an actor-critic architecture"),
    }
}

/// Actor-critic gradients for one trajectory.
///
/// `d_theta += -sum_i [grad log pi(a_i|s_i) (R_i - V(s_i)) + beta grad H(pi(s_i))]`
/// and `d_theta_v += sum_i grad (R_i - V(s_i))^2`, the latter only with
/// respect to `theta_v`.
#[allow(clippy::too_many_arguments)]
pub fn a3c_gradients<F: Real>(
    traj: &Trajectory<F>,
    theta: &[F],
    theta_v: &[F],
    arch: &Architecture,
    beta: F,
    gamma: F,
    d_theta: &mut [F],
    d_theta_v: &mut [F],
) -> Result<A3cStep<F>> {
    traj.validate()?;
    arch.validate()?;
    let bootstrap = if traj.terminal {
        F::zero()
    } else {
        state_value(arch, theta, theta_v, &traj.final_observation)?
    };
    let returns = n_step_returns(&traj.rewards, bootstrap, gamma);
    let mut values = Vec::with_capacity(traj.len());
    let mut entropies = Vec::with_capacity(traj.len());

    for ((obs, action), &ret) in traj.observations.iter().zip(&traj.actions).zip(&returns) {
        match arch {
            Architecture::ActorCritic(spec) => {
                let (out, cache) = forward(spec, theta, theta_v, obs)?;
                let HeadOutput::PolicyValue { probs, value, .. } = out else {
                    unreachable!("validated architecture")
                };
                let a = discrete(action, probs.len())?;
                let adv = ret - value;
                let (h, dh) = policy_entropy(&probs);
                let head = probs
                    .iter()
                    .zip(&dh)
                    .enumerate()
                    .map(|(k, (&p, &dhk))| {
                        let dlogp = if k == a { F::one() - p } else { -p };
                        -(adv * dlogp + beta * dhk)
                    })
                    .collect();
                backward_accumulate(
                    spec,
                    theta,
                    theta_v,
                    &cache,
                    &OutputGrads { head, value: None },
                    d_theta,
                    d_theta_v,
                )?;
                accumulate_value_head(&cache, -two::<F>() * adv, d_theta_v);
                values.push(value);
                entropies.push(h);
            }
            Architecture::Gaussian { policy, value: vspec } => {
                let (vout, vcache) = forward(vspec, theta_v, &[], obs)?;
                let v = vout.q_values()[0];
                let adv = ret - v;
                let (out, cache) = forward(policy, theta, &[], obs)?;
                let HeadOutput::Gaussian { mu, raw_sigma, sigma2 } = out else {
                    unreachable!("validated architecture")
                };
                let act = continuous::<F>(action, mu.len())?;
                let (dmu, ds2) = gaussian_logprob_grads(&mu, sigma2, &act);
                let dsig = sigmoid(raw_sigma);
                let dh_raw = gaussian_entropy_grad::<F>(mu.len(), sigma2) * dsig;
                let mut head: Vec<F> = dmu.iter().map(|&g| -(adv * g)).collect();
                head.push(-(adv * ds2 * dsig + beta * dh_raw));
                backward_accumulate(
                    policy,
                    theta,
                    &[],
                    &cache,
                    &OutputGrads { head, value: None },
                    d_theta,
                    &mut [],
                )?;
                let vgrad = OutputGrads {
                    head: vec![-two::<F>() * adv],
                    value: None,
                };
                backward_accumulate(vspec, theta_v, &[], &vcache, &vgrad, d_theta_v, &mut [])?;
                let half = F::from(0.5).unwrap();
                let dim = F::from(mu.len()).unwrap();
                let h = half * dim * ((F::from(std::f64::consts::TAU).unwrap() * sigma2).ln() + F::one());
                values.push(v);
                entropies.push(h);
            }
            Architecture::Q(_) => return config_err("actor-critic gradients need an actor-critic architecture"),
        }
    }
    Ok(A3cStep {
        returns,
        values,
        entropies,
    })
}

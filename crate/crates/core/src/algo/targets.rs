use crate::error::config_err;
use crate::nn::Real;
use crate::Result;

/// `r` for terminal transitions, otherwise `r + gamma * max_a' q_next`.
pub fn one_step_q_target<F: Real>(reward: F, q_next: &[F], terminal: bool, gamma: F) -> Result<F> {
    if q_next.is_empty() {
        return config_err("no next-state action values");
    }
    if terminal {
        return Ok(reward);
    }
    let max = q_next
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, q| if q > m { q } else { m });
    Ok(reward + gamma * max)
}

/// `r` for terminal transitions, otherwise `r + gamma * Q(s', a')` for the
/// action `a'` actually taken in `s'`.
pub fn one_step_sarsa_target<F: Real>(reward: F, q_next_taken: F, terminal: bool, gamma: F) -> F {
    if terminal {
        reward
    } else {
        reward + gamma * q_next_taken
    }
}

/// Time-ordered n-step returns by the backward recurrence
/// `R <- r_i + gamma R`, starting from `bootstrap`.
pub fn n_step_returns<F: Real>(rewards: &[F], bootstrap: F, gamma: F) -> Vec<F> {
    let mut out = vec![F::zero(); rewards.len()];
    let mut ret = bootstrap;
    for i in (0..rewards.len()).rev() {
        ret = rewards[i] + gamma * ret;
        out[i] = ret;
    }
    out
}

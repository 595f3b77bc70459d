//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the library's network code: forward passes, losses,
//! returns and the serial Q-learning reference are re-derived from scratch.

#![allow(dead_code)]

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use asyncrl_core::algo::{
    a3c_gradients, n_step_q_gradients, one_step_gradient, EpsilonSupport, HyperParams, OneStepRule, OneStepTransition,
    Trajectory,
};
use asyncrl_core::env::Action;
use asyncrl_core::nn::Architecture;
use asyncrl_core::shared::{AtomicF32Vec, TargetSnapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- networks

/// Plain MLP: ReLU hidden layers, linear output. Returns the output and the
/// last hidden activation (the input when there are no hidden layers).
pub fn mlp(sizes: &[usize], params: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = x.to_vec();
    let mut last_hidden = a.clone();
    let mut off = 0;
    let layers = sizes.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        let mut z = vec![0.0; n_out];
        for j in 0..n_out {
            let mut s = b[j];
            for i in 0..n_in {
                s += w[j * n_in + i] * a[i];
            }
            z[j] = s;
        }
        if l + 1 < layers {
            a = z.iter().map(|&v| v.max(0.0)).collect();
            last_hidden = a.clone();
        } else {
            a = z;
        }
    }
    (a, last_hidden)
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn max(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// `R_i = sum_{j >= i} gamma^{j-i} r_j + gamma^{L-i} bootstrap`, summed
/// term by term.
pub fn direct_returns(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|i| {
            let s: f64 = rewards[i..]
                .iter()
                .enumerate()
                .map(|(k, r)| gamma.powi(k as i32) * r)
                .sum();
            s + gamma.powi((n - i) as i32) * bootstrap
        })
        .collect()
}

/// Central finite differences of `f` at `x`.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

// ------------------------------------------------------ gradient checking

pub const FD_REL_TOL: f64 = 1e-4;
/// Partials smaller than this in both forms are compared absolutely.
pub const FD_ABS_FLOOR: f64 = 1e-7;
const FD_STEP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradCase {
    OneStepQ,
    OneStepSarsa,
    NStepQ,
    A3cDiscrete,
    A3cContinuous,
}

impl GradCase {
    pub const ALL: [GradCase; 5] = [
        GradCase::OneStepQ,
        GradCase::OneStepSarsa,
        GradCase::NStepQ,
        GradCase::A3cDiscrete,
        GradCase::A3cContinuous,
    ];
}

#[derive(Clone, Debug, Default)]
pub struct FdReport {
    pub instances: usize,
    pub partials: usize,
    pub failures: usize,
    pub worst_rel: f64,
}

impl FdReport {
    fn compare(&mut self, analytic: &[f64], numeric: &[f64]) {
        assert_eq!(analytic.len(), numeric.len());
        for (&a, &n) in analytic.iter().zip(numeric) {
            self.partials += 1;
            let diff = (a - n).abs();
            let scale = a.abs().max(n.abs());
            if scale <= FD_ABS_FLOOR {
                if diff > FD_ABS_FLOOR {
                    self.failures += 1;
                }
                continue;
            }
            let rel = diff / scale;
            self.worst_rel = self.worst_rel.max(rel);
            if rel > FD_REL_TOL && diff > FD_ABS_FLOOR {
                self.failures += 1;
            }
        }
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn hidden_sizes(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let depth = rng.random_range(0..=2);
    (0..depth).map(|_| rng.random_range(2..=6)).collect()
}

fn random_traj(rng: &mut ChaCha8Rng, input: usize, act: impl Fn(&mut ChaCha8Rng) -> Action) -> Trajectory<f64> {
    let mut t = Trajectory::new();
    let len = rng.random_range(1..=5);
    for _ in 0..len {
        let obs = uniform_vec(rng, input, 1.5);
        let a = act(rng);
        let r = rng.random_range(-1.0..1.0);
        t.push(obs, a, r);
    }
    t.terminal = rng.random_bool(0.3);
    t.final_observation = uniform_vec(rng, input, 1.5);
    t
}

fn disc(a: &Action) -> usize {
    match a {
        Action::Discrete(a) => *a,
        _ => unreachable!(),
    }
}

fn cont(a: &Action) -> Vec<f64> {
    match a {
        Action::Continuous(v) => v.iter().map(|&x| x as f64).collect(),
        _ => unreachable!(),
    }
}

/// Checks the library gradient of `case` against finite differences of an
/// independently written loss on `instances` random problems.
pub fn fd_check(case: GradCase, instances: usize, seed: u64) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FdReport::default();
    for _ in 0..instances {
        rep.instances += 1;
        let input = rng.random_range(1..=4);
        let hidden = hidden_sizes(&mut rng);
        let gamma = rng.random_range(0.5..1.0);
        match case {
            GradCase::OneStepQ | GradCase::OneStepSarsa => {
                let n_act = rng.random_range(2..=4);
                let arch = Architecture::q(input, &hidden, n_act).unwrap();
                let sizes = arch.policy_spec().layer_sizes().to_vec();
                let theta = uniform_vec(&mut rng, arch.theta_len(), 1.0);
                let target = uniform_vec(&mut rng, arch.theta_len(), 1.0);
                let tr = OneStepTransition {
                    observation: uniform_vec(&mut rng, input, 1.5),
                    action: rng.random_range(0..n_act),
                    reward: rng.random_range(-1.0..1.0),
                    next_observation: uniform_vec(&mut rng, input, 1.5),
                    terminal: rng.random_bool(0.3),
                };
                let next_action = rng.random_range(0..n_act);
                let rule = if case == GradCase::OneStepQ {
                    OneStepRule::QLearning
                } else {
                    OneStepRule::Sarsa { next_action }
                };
                let mut buf = vec![0.0; theta.len()];
                one_step_gradient(arch.policy_spec(), &theta, &target, &tr, rule, gamma, &mut buf).unwrap();
                let q_next = mlp(&sizes, &target, &tr.next_observation).0;
                let y = if tr.terminal {
                    tr.reward
                } else if case == GradCase::OneStepQ {
                    tr.reward + gamma * max(&q_next)
                } else {
                    tr.reward + gamma * q_next[next_action]
                };
                let loss = |p: &[f64]| {
                    let q = mlp(&sizes, p, &tr.observation).0;
                    (y - q[tr.action]).powi(2)
                };
                rep.compare(&buf, &numeric_grad(loss, &theta, FD_STEP));
            }
            GradCase::NStepQ => {
                let n_act = rng.random_range(2..=4);
                let arch = Architecture::q(input, &hidden, n_act).unwrap();
                let sizes = arch.policy_spec().layer_sizes().to_vec();
                let theta = uniform_vec(&mut rng, arch.theta_len(), 1.0);
                let target = uniform_vec(&mut rng, arch.theta_len(), 1.0);
                let traj = random_traj(&mut rng, input, |r| Action::Discrete(r.random_range(0..n_act)));
                let mut buf = vec![0.0; theta.len()];
                let got = n_step_q_gradients(&traj, &theta, &target, arch.policy_spec(), gamma, &mut buf).unwrap();
                let boot = if traj.terminal {
                    0.0
                } else {
                    max(&mlp(&sizes, &target, &traj.final_observation).0)
                };
                let returns = direct_returns(&traj.rewards, boot, gamma);
                for (a, b) in got.iter().zip(&returns) {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
                let loss = |p: &[f64]| {
                    traj.observations
                        .iter()
                        .zip(&traj.actions)
                        .zip(&returns)
                        .map(|((o, a), r)| (r - mlp(&sizes, p, o).0[disc(a)]).powi(2))
                        .sum::<f64>()
                };
                rep.compare(&buf, &numeric_grad(loss, &theta, FD_STEP));
            }
            GradCase::A3cDiscrete => {
                let n_act = rng.random_range(2..=4);
                let beta = rng.random_range(0.0..0.1);
                let arch = Architecture::actor_critic(input, &hidden, n_act).unwrap();
                let sizes = arch.policy_spec().layer_sizes().to_vec();
                let theta = uniform_vec(&mut rng, arch.theta_len(), 1.0);
                let theta_v = uniform_vec(&mut rng, arch.theta_v_len(), 1.0);
                let traj = random_traj(&mut rng, input, |r| Action::Discrete(r.random_range(0..n_act)));
                let value = |p: &[f64], pv: &[f64], o: &[f64]| {
                    let h = mlp(&sizes, p, o).1;
                    let k = h.len();
                    pv[k] + h.iter().zip(pv).map(|(x, w)| x * w).sum::<f64>()
                };
                let boot = if traj.terminal {
                    0.0
                } else {
                    value(&theta, &theta_v, &traj.final_observation)
                };
                let returns = direct_returns(&traj.rewards, boot, gamma);
                let adv: Vec<f64> = traj
                    .observations
                    .iter()
                    .zip(&returns)
                    .map(|(o, r)| r - value(&theta, &theta_v, o))
                    .collect();
                let (mut d, mut dv) = (vec![0.0; theta.len()], vec![0.0; theta_v.len()]);
                a3c_gradients(&traj, &theta, &theta_v, &arch, beta, gamma, &mut d, &mut dv).unwrap();
                let policy_loss = |p: &[f64]| {
                    let mut l = 0.0;
                    for ((o, a), &ad) in traj.observations.iter().zip(&traj.actions).zip(&adv) {
                        let lp = log_softmax(&mlp(&sizes, p, o).0);
                        let h: f64 = -lp.iter().map(|&x| x.exp() * x).sum::<f64>();
                        l -= lp[disc(a)] * ad + beta * h;
                    }
                    l
                };
                rep.compare(&d, &numeric_grad(policy_loss, &theta, FD_STEP));
                let value_loss = |pv: &[f64]| {
                    traj.observations
                        .iter()
                        .zip(&returns)
                        .map(|(o, r)| (r - value(&theta, pv, o)).powi(2))
                        .sum::<f64>()
                };
                rep.compare(&dv, &numeric_grad(value_loss, &theta_v, FD_STEP));
            }
            GradCase::A3cContinuous => {
                let dim = rng.random_range(1..=3);
                let beta = rng.random_range(0.0..0.1);
                let arch = Architecture::gaussian(input, &hidden, dim).unwrap();
                let Architecture::Gaussian { policy, value } = &arch else {
                    unreachable!()
                };
                let (ps, vs) = (policy.layer_sizes().to_vec(), value.layer_sizes().to_vec());
                let theta = uniform_vec(&mut rng, arch.theta_len(), 1.0);
                let theta_v = uniform_vec(&mut rng, arch.theta_v_len(), 1.0);
                let traj = random_traj(&mut rng, input, |r| {
                    Action::Continuous((0..dim).map(|_| r.random_range(-2.0f32..2.0)).collect())
                });
                let v = |pv: &[f64], o: &[f64]| mlp(&vs, pv, o).0[0];
                let boot = if traj.terminal {
                    0.0
                } else {
                    v(&theta_v, &traj.final_observation)
                };
                let returns = direct_returns(&traj.rewards, boot, gamma);
                let adv: Vec<f64> = traj
                    .observations
                    .iter()
                    .zip(&returns)
                    .map(|(o, r)| r - v(&theta_v, o))
                    .collect();
                let (mut d, mut dv) = (vec![0.0; theta.len()], vec![0.0; theta_v.len()]);
                a3c_gradients(&traj, &theta, &theta_v, &arch, beta, gamma, &mut d, &mut dv).unwrap();
                let policy_loss = |p: &[f64]| {
                    let mut l = 0.0;
                    for ((o, a), &ad) in traj.observations.iter().zip(&traj.actions).zip(&adv) {
                        let out = mlp(&ps, p, o).0;
                        let s2 = softplus(out[dim]);
                        let a = cont(a);
                        let two_pi = 2.0 * std::f64::consts::PI;
                        let mut logp = 0.0;
                        for k in 0..dim {
                            logp += -0.5 * (two_pi * s2).ln() - (a[k] - out[k]).powi(2) / (2.0 * s2);
                        }
                        let h = 0.5 * dim as f64 * ((two_pi * s2).ln() + 1.0);
                        l -= logp * ad + beta * h;
                    }
                    l
                };
                rep.compare(&d, &numeric_grad(policy_loss, &theta, FD_STEP));
                let value_loss = |pv: &[f64]| {
                    traj.observations
                        .iter()
                        .zip(&returns)
                        .map(|(o, r)| (r - v(pv, o)).powi(2))
                        .sum::<f64>()
                };
                rep.compare(&dv, &numeric_grad(value_loss, &theta_v, FD_STEP));
            }
        }
    }
    rep
}

// ------------------------------------------------ serial Q-learning reference

/// Settings shared by the library run and the reference.
pub struct SerialSetup {
    pub seed: u64,
    pub n_states: usize,
    pub episode_cap: u32,
    pub gamma: f32,
    pub lr: f32,
    pub epsilon: f64,
    pub anneal_frames: u64,
    pub target_interval: u64,
}

impl SerialSetup {
    pub fn standard() -> Self {
        Self {
            seed: 2024,
            n_states: 5,
            episode_cap: 50,
            gamma: 0.99,
            lr: 0.05,
            epsilon: 0.1,
            anneal_frames: 2_000,
            target_interval: 250,
        }
    }

    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            gamma: f64::from(self.gamma),
            t_max: 1,
            target_interval: self.target_interval,
            epsilon: EpsilonSupport::single(self.epsilon),
            anneal_frames: self.anneal_frames,
            ..HyperParams::default()
        }
    }
}

/// Tabular Q-learning written out by hand: linear Q on one-hot chain
/// features, parameters `[w_left(n), w_right(n), b_left, b_right]`, plain
/// SGD on `(y - Q)^2`, target copy refreshed every `target_interval`
/// frames. Random draws follow the documented per-thread protocol.
/// Returns the parameter vector after every step.
pub fn serial_q_reference(setup: &SerialSetup, theta0: &[f32], steps: usize) -> Vec<Vec<f32>> {
    let n = setup.n_states;
    let seed = setup.seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let _eps_draw: f64 = rng.random();
    let eps_final = setup.epsilon;
    let _episode_seed: u64 = rng.random();
    let mut theta = theta0.to_vec();
    let mut target = theta.clone();
    let q = |p: &[f32], s: usize, a: usize| p[2 * n + a] + p[a * n + s];
    let (mut s, mut t_in_episode, mut frames) = (0usize, 0u32, 0u64);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let frac = (frames as f64 / setup.anneal_frames as f64).min(1.0);
        let eps = 1.0 + (eps_final - 1.0) * frac;
        let u: f64 = rng.random();
        let a = if u < eps {
            rng.random_range(0..2)
        } else {
            let (q0, q1) = (q(&theta, s, 0), q(&theta, s, 1));
            if q0 == q1 {
                rng.random_range(0..2)
            } else if q1 > q0 {
                1
            } else {
                0
            }
        };
        let next = if a == 0 { s.saturating_sub(1) } else { s + 1 };
        t_in_episode += 1;
        let terminal = next == n - 1;
        let truncated = !terminal && t_in_episode >= setup.episode_cap;
        let r: f32 = if terminal { 1.0 } else { 0.0 };
        let y = if terminal {
            r
        } else {
            let (t0, t1) = (q(&target, next, 0), q(&target, next, 1));
            r + setup.gamma * if t1 > t0 { t1 } else { t0 }
        };
        let g = 2.0 * (q(&theta, s, a) - y);
        frames += 1;
        if frames % setup.target_interval == 0 {
            target.clone_from(&theta);
        }
        for idx in [a * n + s, 2 * n + a] {
            let delta = -(setup.lr * g);
            if delta != 0.0 {
                theta[idx] += delta;
            }
        }
        out.push(theta.clone());
        if terminal || truncated {
            let _episode_seed: u64 = rng.random();
            s = 0;
            t_in_episode = 0;
        } else {
            s = next;
        }
    }
    out
}

// ------------------------------------------------------------ concurrency

/// `threads` threads each add 1.0 to one shared element `per_thread`
/// times; returns the final value.
pub fn hogwild_count(threads: usize, per_thread: usize) -> f32 {
    let v = Arc::new(AtomicF32Vec::zeros(1));
    let handles: Vec<_> = (0..threads)
        .map(|_| {
            let v = Arc::clone(&v);
            thread::spawn(move || {
                for _ in 0..per_thread {
                    v.add(0, 1.0);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    v.get(0)
}

/// One writer keeps installing uniform vectors whose entries equal their
/// version; `readers` threads load `reads` snapshots in total and count
/// any that mix entries or disagree with their version.
pub fn torn_snapshot_canary(len: usize, readers: usize, reads: usize) -> (usize, u64) {
    let target = Arc::new(TargetSnapshot::new(vec![0.0; len]));
    let done = Arc::new(AtomicBool::new(false));
    let torn = Arc::new(AtomicU64::new(0));
    let writer = {
        let (target, done) = (Arc::clone(&target), Arc::clone(&done));
        thread::spawn(move || {
            let mut k = 0u64;
            while !done.load(Ordering::Acquire) {
                k += 1;
                target.replace(vec![k as f32; len]);
                thread::yield_now();
            }
            k
        })
    };
    let per = reads / readers;
    let handles: Vec<_> = (0..readers)
        .map(|_| {
            let (target, torn) = (Arc::clone(&target), Arc::clone(&torn));
            thread::spawn(move || {
                for _ in 0..per {
                    let snap = target.load();
                    let first = snap.values[0];
                    if first != snap.version as f32 || snap.values.iter().any(|&x| x != first) {
                        torn.fetch_add(1, Ordering::Relaxed);
                    }
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    done.store(true, Ordering::Release);
    let versions = writer.join().unwrap();
    (torn.load(Ordering::Relaxed) as usize, versions)
}

// ----------------------------------------------------------------- entropy

fn entropy_of_logits(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// Feeds the actor-critic gradient a terminal one-step rollout whose reward
/// equals V(s), so the advantage is zero and only the entropy bonus moves
/// the policy. Plain gradient steps in double precision; returns the
/// policy entropy at the probe state before and after every step.
pub fn entropy_trace(n_actions: usize, beta: f64, lr: f64, steps: usize, seed: u64) -> Vec<f64> {
    let arch = Architecture::actor_critic(3, &[6], n_actions).unwrap();
    let sizes = arch.policy_spec().layer_sizes().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // start well away from uniform
    let mut theta = uniform_vec(&mut rng, arch.theta_len(), 1.5);
    let theta_v = uniform_vec(&mut rng, arch.theta_v_len(), 1.0);
    let obs = vec![0.7, -0.4, 1.1];
    let value = |p: &[f64]| {
        let h = mlp(&sizes, p, &obs).1;
        theta_v[h.len()] + h.iter().zip(&theta_v).map(|(x, w)| x * w).sum::<f64>()
    };
    let mut out = vec![entropy_of_logits(&mlp(&sizes, &theta, &obs).0)];
    for _ in 0..steps {
        let mut traj = Trajectory::new();
        traj.push(obs.clone(), Action::Discrete(0), value(&theta));
        traj.terminal = true;
        let mut d = vec![0.0; theta.len()];
        let mut dv = vec![0.0; theta_v.len()];
        a3c_gradients(&traj, &theta, &theta_v, &arch, beta, 0.99, &mut d, &mut dv).unwrap();
        for (p, g) in theta.iter_mut().zip(&d) {
            *p -= lr * g;
        }
        out.push(entropy_of_logits(&mlp(&sizes, &theta, &obs).0));
    }
    out
}

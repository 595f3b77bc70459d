//! The actor-learner loop run by every worker thread.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::exploration::{epsilon_greedy, sample_categorical, sample_epsilon_final, ExplorationPolicy};
use super::gradients::{
    a3c_gradients, n_step_q_gradients, one_step_gradient, OneStepRule, OneStepTransition, Trajectory,
};
use super::{Algorithm, HyperParams};
use crate::env::{Action, ActionSpace, EnvStep, Environment};
use crate::error::config_err;
use crate::nn::{argmax, forward, Architecture, HeadOutput};
use crate::optim::{clip_global_norm, LearningRateSchedule, Optimizer, OptimizerConfig, OptimizerFactory};
use crate::shared::{refresh_target, GlobalCounter, SharedParams, StopFlag, TargetSnapshot};
use crate::Result;

/// Seed of thread `thread_id`'s private generator.
pub fn thread_seed(seed: u64, thread_id: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(thread_id as u64 + 1))
}

/// State common to all threads of one training run.
#[derive(Debug)]
pub struct SharedContext {
    pub algo: Algorithm,
    pub arch: Architecture,
    pub hp: HyperParams,
    pub params: SharedParams,
    /// `theta^-`, present for the value-based methods.
    pub target: Option<TargetSnapshot>,
    pub counter: GlobalCounter,
    pub stop: StopFlag,
    pub lr: LearningRateSchedule,
    pub optim: OptimizerFactory,
    pub optim_v: Option<OptimizerFactory>,
}

impl SharedContext {
    pub fn new(
        algo: Algorithm,
        arch: Architecture,
        hp: HyperParams,
        optimizer: OptimizerConfig,
        lr: LearningRateSchedule,
        theta: &[f32],
        theta_v: &[f32],
    ) -> Result<Self> {
        hp.validate()?;
        arch.validate()?;
        let fits = match algo {
            Algorithm::Q1 | Algorithm::Sarsa1 | Algorithm::Qn => matches!(arch, Architecture::Q(_)),
            Algorithm::A3c => matches!(arch, Architecture::ActorCritic(_)),
            Algorithm::A3cContinuous => matches!(arch, Architecture::Gaussian { .. }),
        };
        if !fits {
            return config_err(format!("{algo} cannot train a {} network", arch.describe()));
        }
        if theta.len() != arch.theta_len() || theta_v.len() != arch.theta_v_len() {
            return config_err(format!(
                "parameter lengths ({}, {}) do not match {} ({}, {})",
                theta.len(),
                theta_v.len(),
                arch.describe(),
                arch.theta_len(),
                arch.theta_v_len()
            ));
        }
        let optim = OptimizerFactory::new(optimizer.clone(), theta.len())?;
        let optim_v = if theta_v.is_empty() {
            None
        } else {
            Some(OptimizerFactory::new(optimizer, theta_v.len())?)
        };
        Ok(Self {
            algo,
            target: algo.uses_target_network().then(|| TargetSnapshot::new(theta.to_vec())),
            arch,
            hp,
            params: SharedParams::new(theta, theta_v),
            counter: GlobalCounter::new(),
            stop: StopFlag::default(),
            lr,
            optim,
            optim_v,
        })
    }

    /// Checks that `env` produces observations and accepts actions of the
    /// shapes the network expects.
    pub fn check_env(&self, env: &dyn Environment) -> Result<()> {
        if env.observation_dim() != self.arch.input_dim() {
            return config_err(format!(
                "environment observations have {} entries, network expects {}",
                env.observation_dim(),
                self.arch.input_dim()
            ));
        }
        let want = self.arch.policy_spec().action_dim();
        let ok = match (env.action_space(), &self.arch) {
            (ActionSpace::Discrete(n), Architecture::Q(_) | Architecture::ActorCritic(_)) => n == want,
            (ActionSpace::Continuous(d), Architecture::Gaussian { .. }) => d == want,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            config_err(format!(
                "action space {:?} does not fit {}",
                env.action_space(),
                self.arch.describe()
            ))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThreadStats {
    pub thread_id: usize,
    /// Environment steps taken by this thread.
    pub steps: u64,
    pub episodes: u64,
    pub updates: u64,
    pub episode_returns: Vec<f64>,
}

/// One worker: a private environment, generator and optimizer state.
pub struct ActorLearner {
    rng: ChaCha8Rng,
    env: Box<dyn Environment>,
    explore: ExplorationPolicy,
    opt: Optimizer,
    opt_v: Option<Optimizer>,
    obs: Vec<f32>,
    episode_return: f64,
    grad: Vec<f32>,
    grad_v: Vec<f32>,
    pending: usize,
    next_action: Option<usize>,
    traj: Trajectory<f32>,
    stats: ThreadStats,
}

impl ActorLearner {
    pub fn new(ctx: &SharedContext, mut env: Box<dyn Environment>, thread_id: usize, seed: u64) -> Result<Self> {
        ctx.check_env(env.as_ref())?;
        let mut rng = ChaCha8Rng::seed_from_u64(thread_seed(seed, thread_id));
        let epsilon_final = sample_epsilon_final(&ctx.hp.epsilon, &mut rng)?;
        let obs = env.reset(rng.random::<u64>());
        Ok(Self {
            rng,
            env,
            explore: ExplorationPolicy {
                epsilon_final,
                anneal_frames: ctx.hp.anneal_frames,
                thread_id,
            },
            opt: ctx.optim.make(),
            opt_v: ctx.optim_v.as_ref().map(OptimizerFactory::make),
            obs,
            episode_return: 0.0,
            grad: vec![0.0; ctx.arch.theta_len()],
            grad_v: vec![0.0; ctx.arch.theta_v_len()],
            pending: 0,
            next_action: None,
            traj: Trajectory::new(),
            stats: ThreadStats {
                thread_id,
                ..ThreadStats::default()
            },
        })
    }

    pub fn thread_id(&self) -> usize {
        self.stats.thread_id
    }

    pub fn epsilon_final(&self) -> f64 {
        self.explore.epsilon_final
    }

    pub fn stats(&self) -> &ThreadStats {
        &self.stats
    }

    pub fn into_stats(self) -> ThreadStats {
        self.stats
    }

    /// Runs until the global counter reaches `limit` or the stop flag is
    /// raised.
    pub fn run_until(&mut self, ctx: &SharedContext, limit: u64) -> Result<()> {
        while self.step_once(ctx, limit)? {}
        Ok(())
    }

    /// Performs one environment step (one-step methods) or one rollout of up
    /// to `t_max` steps. Returns `false` without acting once the counter has
    /// reached `limit` or the stop flag is up. Any failure raises the flag.
    pub fn step_once(&mut self, ctx: &SharedContext, limit: u64) -> Result<bool> {
        if ctx.stop.is_raised() || ctx.counter.get() >= limit {
            return Ok(false);
        }
        let res = match ctx.algo {
            Algorithm::Q1 | Algorithm::Sarsa1 => self.one_step(ctx),
            _ => self.rollout(ctx),
        };
        if let Err(e) = res {
            ctx.stop.raise();
            return Err(e);
        }
        Ok(true)
    }

    fn choose(&mut self, ctx: &SharedContext, theta: &[f32], obs: &[f32], eps: f64) -> Result<usize> {
        let (out, _) = forward(ctx.arch.policy_spec(), theta, &[], obs)?;
        Ok(epsilon_greedy(out.q_values(), eps, &mut self.rng))
    }

    fn one_step(&mut self, ctx: &SharedContext) -> Result<()> {
        let hp = &ctx.hp;
        let theta = ctx.params.snapshot();
        let eps = self.explore.epsilon_at(ctx.counter.get());
        let a = match self.next_action.take() {
            Some(a) => a,
            None => {
                let obs = std::mem::take(&mut self.obs);
                let a = self.choose(ctx, &theta, &obs, eps);
                self.obs = obs;
                a?
            }
        };
        let EnvStep {
            observation,
            reward,
            terminal,
            truncated,
        } = self.env.step(&Action::Discrete(a))?;
        self.episode_return += f64::from(reward);
        let over = terminal || truncated;
        let terminal = terminal || (truncated && !hp.bootstrap_on_truncation);
        let rule = match ctx.algo {
            Algorithm::Sarsa1 if !terminal => {
                let next = self.choose(ctx, &theta, &observation, eps)?;
                if !over {
                    self.next_action = Some(next);
                }
                OneStepRule::Sarsa { next_action: next }
            }
            Algorithm::Sarsa1 => OneStepRule::Sarsa { next_action: 0 },
            _ => OneStepRule::QLearning,
        };
        let target = ctx.target.as_ref().expect("value-based context has a target").load();
        let tr = OneStepTransition {
            observation: std::mem::replace(&mut self.obs, observation),
            action: a,
            reward,
            next_observation: self.obs.clone(),
            terminal,
        };
        one_step_gradient(
            ctx.arch.policy_spec(),
            &theta,
            &target.values,
            &tr,
            rule,
            hp.gamma as f32,
            &mut self.grad,
        )?;
        self.stats.steps += 1;
        self.pending += 1;
        let after = ctx.counter.increment(1);
        if let Some(t) = &ctx.target {
            refresh_target(&ctx.params, t, after - 1, after, hp.target_interval);
        }
        if self.pending >= hp.t_max || over {
            self.apply(ctx, after)?;
        }
        if over {
            self.end_episode(ctx)?;
        }
        Ok(())
    }

    fn act(&mut self, ctx: &SharedContext, theta: &[f32], theta_v: &[f32]) -> Result<Action> {
        match &ctx.arch {
            Architecture::Q(spec) => {
                let (out, _) = forward(spec, theta, &[], &self.obs)?;
                let eps = self.explore.epsilon_at(ctx.counter.get());
                Ok(Action::Discrete(epsilon_greedy(out.q_values(), eps, &mut self.rng)))
            }
            Architecture::ActorCritic(spec) => match forward(spec, theta, theta_v, &self.obs)?.0 {
                HeadOutput::PolicyValue { probs, .. } => {
                    Ok(Action::Discrete(sample_categorical(&probs, &mut self.rng)))
                }
                _ => unreachable!("validated architecture"),
            },
            Architecture::Gaussian { policy, .. } => match forward(policy, theta, &[], &self.obs)?.0 {
                HeadOutput::Gaussian { mu, sigma2, .. } => {
                    let sd = sigma2.sqrt();
                    let a = mu
                        .iter()
                        .map(|&m| m + sd * self.rng.sample::<f32, _>(StandardNormal))
                        .collect();
                    Ok(Action::Continuous(a))
                }
                _ => unreachable!("validated architecture"),
            },
        }
    }

    fn rollout(&mut self, ctx: &SharedContext) -> Result<()> {
        let hp = &ctx.hp;
        let theta = ctx.params.snapshot();
        let theta_v = ctx.params.snapshot_v();
        let target = ctx.target.as_ref().map(TargetSnapshot::load);
        self.traj.clear();
        let mut over = false;
        while self.traj.len() < hp.t_max {
            let action = self.act(ctx, &theta, &theta_v)?;
            let step = self.env.step(&action)?;
            self.episode_return += f64::from(step.reward);
            let obs = std::mem::replace(&mut self.obs, step.observation);
            self.traj.push(obs, action, step.reward);
            self.stats.steps += 1;
            if step.terminal || step.truncated {
                over = true;
                self.traj.terminal = step.terminal || (step.truncated && !hp.bootstrap_on_truncation);
                break;
            }
        }
        self.traj.final_observation.clone_from(&self.obs);
        let gamma = hp.gamma as f32;
        match ctx.algo {
            Algorithm::Qn => {
                let target = target.expect("value-based context has a target");
                n_step_q_gradients(
                    &self.traj,
                    &theta,
                    &target.values,
                    ctx.arch.policy_spec(),
                    gamma,
                    &mut self.grad,
                )?;
            }
            _ => {
                a3c_gradients(
                    &self.traj,
                    &theta,
                    &theta_v,
                    &ctx.arch,
                    hp.beta as f32,
                    gamma,
                    &mut self.grad,
                    &mut self.grad_v,
                )?;
            }
        }
        let n = self.traj.len() as u64;
        let after = ctx.counter.increment(n);
        self.apply(ctx, after)?;
        if let Some(t) = &ctx.target {
            refresh_target(&ctx.params, t, after - n, after, hp.target_interval);
        }
        if over {
            self.end_episode(ctx)?;
        }
        Ok(())
    }

    fn apply(&mut self, ctx: &SharedContext, frame: u64) -> Result<()> {
        let eta = ctx.lr.eta(frame) as f32;
        if let Some(c) = ctx.hp.clip_norm {
            clip_global_norm(&mut self.grad, c);
            clip_global_norm(&mut self.grad_v, c);
        }
        self.opt.step(ctx.params.theta(), &self.grad, eta)?;
        if let Some(o) = &mut self.opt_v {
            o.step(ctx.params.theta_v(), &self.grad_v, eta)?;
        }
        self.grad.fill(0.0);
        self.grad_v.fill(0.0);
        self.pending = 0;
        self.stats.updates += 1;
        Ok(())
    }

    fn end_episode(&mut self, ctx: &SharedContext) -> Result<()> {
        self.stats.episodes += 1;
        self.stats.episode_returns.push(self.episode_return);
        self.episode_return = 0.0;
        if ctx.hp.resample_epsilon_each_episode {
            self.explore.epsilon_final = sample_epsilon_final(&ctx.hp.epsilon, &mut self.rng)?;
        }
        self.obs = self.env.reset(self.rng.random::<u64>());
        self.next_action = None;
        Ok(())
    }
}

/// Builds a learner for `thread_id` and runs it until the counter reaches
/// `limit`.
pub fn run_actor_learner(
    ctx: &SharedContext,
    env: Box<dyn Environment>,
    thread_id: usize,
    seed: u64,
    limit: u64,
) -> Result<ThreadStats> {
    let mut learner = match ActorLearner::new(ctx, env, thread_id, seed) {
        Ok(l) => l,
        Err(e) => {
            ctx.stop.raise();
            return Err(e);
        }
    };
    learner.run_until(ctx, limit)?;
    Ok(learner.into_stats())
}

/// Deterministic action used for evaluation: the best Q-value, the most
/// probable discrete action, or the Gaussian mean.
pub fn greedy_action(arch: &Architecture, theta: &[f32], theta_v: &[f32], obs: &[f32]) -> Result<Action> {
    match arch {
        Architecture::Q(spec) => Ok(Action::Discrete(argmax(forward(spec, theta, &[], obs)?.0.q_values()))),
        Architecture::ActorCritic(spec) => match forward(spec, theta, theta_v, obs)?.0 {
            HeadOutput::PolicyValue { probs, .. } => Ok(Action::Discrete(argmax(&probs))),
            _ => unreachable!("validated architecture"),
        },
        Architecture::Gaussian { policy, .. } => Ok(Action::Continuous(
            forward(policy, theta, &[], obs)?.0.q_values().to_vec(),
        )),
    }
}

mod support;

use std::thread;

use asyncrl_core::algo::{run_actor_learner, Algorithm, EpsilonSupport, HyperParams, SharedContext};
use asyncrl_core::env::{value_iteration, ChainMdp, EnvConfig};
use asyncrl_core::nn::{forward, Architecture};
use asyncrl_core::optim::{LearningRateSchedule, OptimizerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::entropy_trace;

fn chain_error(ctx: &SharedContext) -> f64 {
    let chain = ChainMdp::new(5, 50).unwrap();
    let oracle = value_iteration(&chain, ctx.hp.gamma, 1e-12).unwrap();
    let theta = ctx.params.snapshot();
    let mut err = 0.0f64;
    for s in 0..4 {
        let (out, _) = forward(ctx.arch.policy_spec(), &theta, &[], &chain.observe(s)).unwrap();
        for a in 0..2 {
            err = err.max((f64::from(out.q_values()[a]) - oracle.q[s][a]).abs());
        }
    }
    err
}

fn run_chain(algo: Algorithm, threads: usize, frames: u64) -> f64 {
    let arch = Architecture::q(5, &[], 2).unwrap();
    let (t, _) = arch.init_params(&mut ChaCha8Rng::seed_from_u64(3));
    let hp = HyperParams {
        target_interval: 1000,
        anneal_frames: 100_000,
        epsilon: EpsilonSupport::single(0.01),
        ..HyperParams::default()
    };
    let ctx = SharedContext::new(
        algo,
        arch,
        hp,
        OptimizerConfig::default(),
        LearningRateSchedule::linear(0.01, frames),
        &t,
        &[],
    )
    .unwrap();
    thread::scope(|s| {
        for id in 0..threads {
            let ctx = &ctx;
            s.spawn(move || run_actor_learner(ctx, EnvConfig::chain().build().unwrap(), id, 21, frames).unwrap());
        }
    });
    chain_error(&ctx)
}

#[test]
fn one_step_q_converges_on_the_chain() {
    let err = run_chain(Algorithm::Q1, 1, 200_000);
    assert!(err <= 0.01, "max error {err}");
}

#[test]
fn n_step_q_converges_on_the_chain() {
    let err = run_chain(Algorithm::Qn, 1, 200_000);
    assert!(err <= 0.01, "max error {err}");
}

#[test]
fn async_q_with_several_threads_still_converges() {
    let err = run_chain(Algorithm::Q1, 4, 200_000);
    assert!(err <= 0.01, "max error {err}");
}

#[test]
fn zero_advantage_updates_raise_entropy_to_the_maximum() {
    let max = 4f64.ln();
    let trace = entropy_trace(4, 0.01, 5.0, 20_000, 9);
    assert!(trace[0] < max - 0.05, "starts at {}", trace[0]);
    for w in trace.windows(2) {
        assert!(w[1] > w[0] || max - w[1] < 1e-6, "{} -> {}", w[0], w[1]);
    }
    let last = *trace.last().unwrap();
    assert!((max - last).abs() <= 1e-6, "final entropy {last}");
}

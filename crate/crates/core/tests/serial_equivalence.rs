mod support;

use asyncrl_core::algo::{ActorLearner, Algorithm, SharedContext};
use asyncrl_core::env::EnvConfig;
use asyncrl_core::nn::Architecture;
use asyncrl_core::optim::{LearningRateSchedule, OptimizerConfig, OptimizerKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{serial_q_reference, SerialSetup};

fn plain_sgd() -> OptimizerConfig {
    OptimizerConfig {
        kind: OptimizerKind::MomentumSgd,
        momentum: 0.0,
        ..OptimizerConfig::default()
    }
}

#[test]
fn one_thread_matches_serial_reference_bit_for_bit() {
    let setup = SerialSetup::standard();
    let arch = Architecture::q(setup.n_states, &[], 2).unwrap();
    let (theta0, _) = arch.init_params(&mut ChaCha8Rng::seed_from_u64(1));
    let ctx = SharedContext::new(
        Algorithm::Q1,
        arch,
        setup.hyper_params(),
        plain_sgd(),
        LearningRateSchedule::constant(f64::from(setup.lr)),
        &theta0,
        &[],
    )
    .unwrap();
    let env = EnvConfig::Chain {
        n_states: setup.n_states,
        episode_cap: setup.episode_cap,
    };
    let mut learner = ActorLearner::new(&ctx, env.build().unwrap(), 0, setup.seed).unwrap();
    let steps = 10_000;
    let reference = serial_q_reference(&setup, &theta0, steps);
    for (k, want) in reference.iter().enumerate() {
        assert!(learner.step_once(&ctx, u64::MAX).unwrap());
        let got = ctx.params.snapshot();
        let same = got.iter().zip(want).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "diverged at step {k}: {got:?} vs {want:?}");
    }
    assert!(learner.stats().episodes > 10);
    assert_ne!(ctx.params.snapshot(), theta0);
}

#[test]
fn zero_frame_budget_takes_no_steps() {
    for algo in [Algorithm::Q1, Algorithm::Qn, Algorithm::A3c] {
        let arch = match algo {
            Algorithm::A3c => Architecture::actor_critic(5, &[4], 2).unwrap(),
            _ => Architecture::q(5, &[4], 2).unwrap(),
        };
        let (t, v) = arch.init_params(&mut ChaCha8Rng::seed_from_u64(0));
        let ctx = SharedContext::new(
            algo,
            arch,
            Default::default(),
            OptimizerConfig::default(),
            LearningRateSchedule::constant(0.01),
            &t,
            &v,
        )
        .unwrap();
        let mut l = ActorLearner::new(&ctx, EnvConfig::chain().build().unwrap(), 0, 3).unwrap();
        l.run_until(&ctx, 0).unwrap();
        assert_eq!(l.stats().steps, 0);
        assert_eq!(ctx.params.snapshot(), t);
        assert_eq!(ctx.params.snapshot_v(), v);
    }
}

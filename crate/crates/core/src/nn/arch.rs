use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HeadKind, MlpSpec};
use crate::error::config_err;
use crate::Result;

/// The network(s) behind one learner, and how they map onto the two shared
/// parameter vectors `theta` and `theta_v`.
///
/// * `Q`: action values in `theta`; no `theta_v`.
/// * `ActorCritic`: shared trunk and softmax head in `theta`, linear value
///   head in `theta_v`.
/// * `Gaussian`: policy network in `theta`, a separate value network in
///   `theta_v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    Q(MlpSpec),
    ActorCritic(MlpSpec),
    Gaussian { policy: MlpSpec, value: MlpSpec },
}

impl Architecture {
    pub fn q(input: usize, hidden: &[usize], actions: usize) -> Result<Self> {
        Ok(Self::Q(MlpSpec::with_hidden(
            input,
            hidden,
            actions,
            HeadKind::QValues,
        )?))
    }

    pub fn actor_critic(input: usize, hidden: &[usize], actions: usize) -> Result<Self> {
        Ok(Self::ActorCritic(MlpSpec::with_hidden(
            input,
            hidden,
            actions,
            HeadKind::PolicyValueShared,
        )?))
    }

    pub fn gaussian(input: usize, hidden: &[usize], action_dim: usize) -> Result<Self> {
        Ok(Self::Gaussian {
            policy: MlpSpec::with_hidden(input, hidden, action_dim + 1, HeadKind::GaussianPolicy)?,
            value: MlpSpec::with_hidden(input, hidden, 1, HeadKind::QValues)?,
        })
    }

    /// Checks the head kinds match the variant.
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Q(s) => s.head() == HeadKind::QValues,
            Self::ActorCritic(s) => s.head() == HeadKind::PolicyValueShared,
            Self::Gaussian { policy, value } => {
                policy.head() == HeadKind::GaussianPolicy
                    && value.head() == HeadKind::QValues
                    && value.output_dim() == 1
                    && value.input_dim() == policy.input_dim()
            }
        };
        if ok {
            Ok(())
        } else {
            config_err(format!("inconsistent architecture: {self:?}"))
        }
    }

    /// The network whose outputs drive action selection.
    pub fn policy_spec(&self) -> &MlpSpec {
        match self {
            Self::Q(s) | Self::ActorCritic(s) => s,
            Self::Gaussian { policy, .. } => policy,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.policy_spec().input_dim()
    }

    pub fn theta_len(&self) -> usize {
        self.policy_spec().param_count()
    }

    pub fn theta_v_len(&self) -> usize {
        match self {
            Self::Q(_) => 0,
            Self::ActorCritic(s) => s.value_param_count(),
            Self::Gaussian { value, .. } => value.param_count(),
        }
    }

    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f32>, Vec<f32>) {
        match self {
            Self::Q(s) | Self::ActorCritic(s) => s.init_params(rng),
            Self::Gaussian { policy, value } => {
                let (theta, _) = policy.init_params(rng);
                let (theta_v, _) = value.init_params(rng);
                (theta, theta_v)
            }
        }
    }

    /// Canonical text form, e.g. `q[5-2]` or `gauss[3-32-2|3-32-1]`.
    pub fn describe(&self) -> String {
        let sizes = |s: &MlpSpec| {
            s.layer_sizes()
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join("-")
        };
        match self {
            Self::Q(s) => format!("q[{}]", sizes(s)),
            Self::ActorCritic(s) => format!("ac[{}]", sizes(s)),
            Self::Gaussian { policy, value } => format!("gauss[{}|{}]", sizes(policy), sizes(value)),
        }
    }

    /// 64-bit FNV-1a of [`Self::describe`]; stable across builds and
    /// platforms, used to tag checkpoints.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        self.describe()
            .bytes()
            .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
    }
}

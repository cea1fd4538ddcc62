//! The learned policy and the fixed baselines behind one interface.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embedding::StateVector;
use crate::ppo::{policy_forward, sample_action, PolicyParams, PpoError};
use crate::seeds::Rng;
use crate::transforms::ActionId;

/// Policy selector as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Ppo,
    Direct,
    Ga,
    Rewrite,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Ppo,
        PolicyKind::Direct,
        PolicyKind::Ga,
        PolicyKind::Rewrite,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Ppo => "ppo",
            PolicyKind::Direct => "direct",
            PolicyKind::Ga => "ga",
            PolicyKind::Rewrite => "rewrite",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown policy {s:?} (expected ppo, direct, ga, rewrite or random)"))
    }
}

/// A concrete refinement policy.
#[derive(Debug, Clone, PartialEq)]
pub enum RefinementPolicy {
    Ppo(PolicyParams),
    Direct,
    GaOnly,
    RewriteOnly,
    RandomHybrid,
}

/// An action with the policy's log-probability and value estimate (PPO only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub action: ActionId,
    pub log_prob: Option<f64>,
    pub value: Option<f64>,
}

impl RefinementPolicy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            RefinementPolicy::Ppo(_) => PolicyKind::Ppo,
            RefinementPolicy::Direct => PolicyKind::Direct,
            RefinementPolicy::GaOnly => PolicyKind::Ga,
            RefinementPolicy::RewriteOnly => PolicyKind::Rewrite,
            RefinementPolicy::RandomHybrid => PolicyKind::Random,
        }
    }

    /// Baseline for `kind`; `None` for PPO, which needs parameters.
    pub fn baseline(kind: PolicyKind) -> Option<Self> {
        match kind {
            PolicyKind::Ppo => None,
            PolicyKind::Direct => Some(RefinementPolicy::Direct),
            PolicyKind::Ga => Some(RefinementPolicy::GaOnly),
            PolicyKind::Rewrite => Some(RefinementPolicy::RewriteOnly),
            PolicyKind::Random => Some(RefinementPolicy::RandomHybrid),
        }
    }

    /// Pick an action for `state`. Only PPO and Random-Hybrid consume `rng`.
    pub fn choose_action(&self, state: &StateVector, rng: &mut Rng) -> Result<Choice, PpoError> {
        let fixed = |action| Choice {
            action,
            log_prob: None,
            value: None,
        };
        Ok(match self {
            RefinementPolicy::Ppo(params) => {
                let (probs, value) = policy_forward(params, &state.values)?;
                let (action, log_prob) = sample_action(&probs, rng)?;
                Choice {
                    action,
                    log_prob: Some(log_prob),
                    value: Some(value),
                }
            }
            RefinementPolicy::Direct => fixed(ActionId::DirectGeneration),
            RefinementPolicy::GaOnly => fixed(ActionId::GeneticMutation),
            RefinementPolicy::RewriteOnly => fixed(ActionId::SemanticRewrite),
            RefinementPolicy::RandomHybrid => fixed(ActionId::from_index(rng.random_range(0..ActionId::COUNT)).expect("in range")),
        })
    }
}

//! Proximal policy optimization for the three-action refinement policy.

mod gae;
mod loss;
mod net;
mod optim;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seeds::Rng;
use crate::transforms::ActionId;

pub use gae::{compute_gae, Batch};
pub use loss::{clipped_surrogate, ppo_loss, ppo_loss_and_grad, Gradients, LossParts};
pub use net::{log_softmax, softmax, Forward, Mlp, PolicyParams, HIDDEN};
pub use optim::{global_norm, ppo_update, ppo_update_with_retry, Adam, UpdateOutcome, UpdateStats};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PpoError {
    #[error("state has dimension {got}, policy expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid action distribution {0:?}")]
    DegenerateDistribution(Vec<f64>),
    #[error("array lengths differ: {0}")]
    LengthMismatch(String),
    #[error("loss or gradient became non-finite")]
    NonFiniteLoss,
    #[error("empty batch")]
    EmptyBatch,
    #[error("ppo config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub update_every_episodes: usize,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 3e-4,
            epochs_per_update: 4,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            update_every_episodes: 8,
            hidden: HIDDEN,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.to_string()));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must be in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 || self.update_every_episodes == 0 {
            return bad("epochs_per_update, minibatch_size and update_every_episodes must be positive");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.max_grad_norm <= 0.0 {
            return bad("coefficients must be non-negative and max_grad_norm positive");
        }
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        Ok(())
    }
}

/// Action probabilities and state value.
pub fn policy_forward(params: &PolicyParams, state: &[f64]) -> Result<([f64; 3], f64), PpoError> {
    let logits = params.policy.forward(state)?;
    let value = params.value.forward(state)?.output()[0];
    let p = softmax(logits.output());
    let probs = [p[0], p[1], p[2]];
    if !probs.iter().all(|v| v.is_finite()) || !value.is_finite() {
        return Err(PpoError::NonFiniteLoss);
    }
    Ok((probs, value))
}

/// Categorical draw from `probs`; returns the action and its log-probability.
pub fn sample_action(probs: &[f64; 3], rng: &mut Rng) -> Result<(ActionId, f64), PpoError> {
    let sum: f64 = probs.iter().sum();
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-4 {
        return Err(PpoError::DegenerateDistribution(probs.to_vec()));
    }
    let u: f64 = rng.random::<f64>() * sum;
    let mut acc = 0.0;
    let mut pick = None;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if *p > 0.0 && u < acc {
            pick = Some(i);
            break;
        }
    }
    // rounding can leave u just above the final cumulative sum
    let i = pick.unwrap_or_else(|| probs.iter().rposition(|p| *p > 0.0).expect("positive mass"));
    Ok((ActionId::from_index(i).expect("three actions"), probs[i].ln()))
}

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ppo_loss_and_grad, Batch, Gradients, PolicyParams, PpoConfig, PpoError};
use crate::seeds::Rng;

/// Adam moment estimates over the concatenated policy and value parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: &PolicyParams) -> Self {
        let n = params.param_count();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn step(&mut self, params: &mut PolicyParams, grad: &Gradients, lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let targets = params.policy.params.iter_mut().chain(params.value.params.iter_mut());
        for (((p, g), m), v) in targets.zip(grad.iter()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

pub fn global_norm(grad: &Gradients) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub minibatches: usize,
    pub mean_loss: f64,
    pub mean_policy_loss: f64,
    pub mean_value_loss: f64,
    pub mean_entropy: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub params: PolicyParams,
    pub adam: Adam,
    pub stats: UpdateStats,
}

/// Shuffled minibatch epochs of Adam with global gradient-norm clipping.
/// Inputs are left untouched.
pub fn ppo_update(
    params: &PolicyParams,
    adam: &Adam,
    batch: &Batch,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut Rng,
) -> Result<UpdateOutcome, PpoError> {
    batch.check()?;
    if adam.m.len() != params.param_count() {
        return Err(PpoError::LengthMismatch(format!(
            "optimizer holds {} moments for {} parameters",
            adam.m.len(),
            params.param_count()
        )));
    }
    let mut params = params.clone();
    let mut adam = adam.clone();
    let mut stats = UpdateStats {
        learning_rate: lr,
        ..UpdateStats::default()
    };
    let mut order: Vec<usize> = (0..batch.len()).collect();
    for _ in 0..cfg.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let (parts, mut grad) = ppo_loss_and_grad(&params, batch, chunk, cfg)?;
            let norm = global_norm(&grad);
            if norm > cfg.max_grad_norm {
                let scale = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= scale);
            }
            adam.step(&mut params, &grad, lr);
            if !params.all_finite() {
                return Err(PpoError::NonFiniteLoss);
            }
            stats.minibatches += 1;
            stats.mean_loss += parts.total;
            stats.mean_policy_loss += parts.policy;
            stats.mean_value_loss += parts.value;
            stats.mean_entropy -= parts.entropy;
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.mean_loss /= k;
    stats.mean_policy_loss /= k;
    stats.mean_value_loss /= k;
    stats.mean_entropy /= k;
    Ok(UpdateOutcome { params, adam, stats })
}

/// [`ppo_update`], retried once at half the learning rate on divergence.
/// The returned stats carry the learning rate that succeeded.
pub fn ppo_update_with_retry(
    params: &PolicyParams,
    adam: &Adam,
    batch: &Batch,
    cfg: &PpoConfig,
    lr: f64,
    rng: &mut Rng,
) -> Result<UpdateOutcome, PpoError> {
    let snapshot = rng.clone();
    match ppo_update(params, adam, batch, cfg, lr, rng) {
        Err(PpoError::NonFiniteLoss) => {
            *rng = snapshot;
            ppo_update(params, adam, batch, cfg, lr / 2.0, rng)
        }
        other => other,
    }
}

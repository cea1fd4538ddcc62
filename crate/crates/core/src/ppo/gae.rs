use serde::{Deserialize, Serialize};

use super::{PpoConfig, PpoError};
use crate::env::EpisodeTrace;
use crate::transforms::ActionId;

/// Generalized advantage estimates and bootstrapped returns.
///
/// The value after the last element is taken as 0, as is the value after any
/// step flagged done.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(PpoError::LengthMismatch(format!(
            "rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Transitions gathered for one update, with advantages already computed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Batch {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<ActionId>,
    pub old_log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// GAE per episode, then concatenation and advantage normalization.
    pub fn from_episodes(episodes: &[EpisodeTrace], cfg: &PpoConfig) -> Result<Self, PpoError> {
        let mut b = Batch::default();
        for ep in episodes {
            let ts = &ep.transitions;
            let rewards: Vec<f64> = ts.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = ts
                .iter()
                .map(|t| t.value.ok_or_else(|| PpoError::Config("transition has no value estimate".into())))
                .collect::<Result<_, _>>()?;
            let dones: Vec<bool> = ts.iter().map(|t| t.done).collect();
            let (adv, ret) = compute_gae(&rewards, &values, &dones, cfg.gamma, cfg.gae_lambda)?;
            for t in ts {
                b.states.push(t.state.clone());
                b.actions.push(t.action);
                b.old_log_probs.push(
                    t.log_prob
                        .ok_or_else(|| PpoError::Config("transition has no log-probability".into()))?,
                );
            }
            b.rewards.extend(rewards);
            b.values.extend(values);
            b.dones.extend(dones);
            b.advantages.extend(adv);
            b.returns.extend(ret);
        }
        b.normalize_advantages();
        Ok(b)
    }

    /// Zero mean, unit variance when there are at least two samples.
    pub fn normalize_advantages(&mut self) {
        let n = self.advantages.len();
        if n < 2 {
            return;
        }
        let mean = self.advantages.iter().sum::<f64>() / n as f64;
        let var = self.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt().max(1e-8);
        self.advantages.iter_mut().for_each(|a| *a = (*a - mean) / sd);
    }

    pub fn check(&self) -> Result<(), PpoError> {
        let n = self.len();
        let lens = [
            self.actions.len(),
            self.old_log_probs.len(),
            self.rewards.len(),
            self.values.len(),
            self.dones.len(),
            self.advantages.len(),
            self.returns.len(),
        ];
        if lens.iter().any(|l| *l != n) {
            return Err(PpoError::LengthMismatch(format!("states {n}, others {lens:?}")));
        }
        if n == 0 {
            return Err(PpoError::EmptyBatch);
        }
        Ok(())
    }
}

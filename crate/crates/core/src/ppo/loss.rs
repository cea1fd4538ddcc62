use super::{log_softmax, Batch, PolicyParams, PpoConfig, PpoError};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    /// `-mean(min(rA, clip(r)A))`
    pub policy: f64,
    /// Mean squared error of the value head.
    pub value: f64,
    /// Negative mean entropy.
    pub entropy: f64,
}

/// Gradients with the same layout as [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(p: &PolicyParams) -> Self {
        Self {
            policy: vec![0.0; p.policy.params.len()],
            value: vec![0.0; p.value.params.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.policy.iter().chain(&self.value)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.policy.iter_mut().chain(self.value.iter_mut())
    }
}

/// `min(r * a, clip(r, 1 - eps, 1 + eps) * a)`
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Loss over the samples at `indices`, with analytic gradients.
pub fn ppo_loss_and_grad(
    params: &PolicyParams,
    batch: &Batch,
    indices: &[usize],
    cfg: &PpoConfig,
) -> Result<(LossParts, Gradients), PpoError> {
    batch.check()?;
    if indices.is_empty() {
        return Err(PpoError::EmptyBatch);
    }
    let n = indices.len() as f64;
    let eps = cfg.clip_epsilon;
    let mut parts = LossParts::default();
    let mut grad = Gradients::zeros_like(params);

    for &i in indices {
        let state = &batch.states[i];
        let a = batch.actions[i].index();
        let adv = batch.advantages[i];

        let pf = params.policy.forward(state)?;
        let logp = log_softmax(pf.output());
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let ratio = (logp[a] - batch.old_log_probs[i]).exp();
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        parts.policy -= unclipped.min(clipped) / n;
        // the clipped branch is flat in the parameters
        let d_logp = if unclipped <= clipped { -ratio * adv / n } else { 0.0 };

        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        parts.entropy -= entropy / n;

        let d_logits: Vec<f64> = (0..probs.len())
            .map(|j| {
                let onehot = if j == a { 1.0 } else { 0.0 };
                let policy = d_logp * (onehot - probs[j]);
                // d(-H)/dz_j = p_j (log p_j + H)
                let ent = cfg.entropy_coef * probs[j] * (logp[j] + entropy) / n;
                policy + ent
            })
            .collect();
        params.policy.backward(&pf, &d_logits, &mut grad.policy);

        let vf = params.value.forward(state)?;
        let err = vf.output()[0] - batch.returns[i];
        parts.value += err * err / n;
        params.value.backward(&vf, &[cfg.value_coef * 2.0 * err / n], &mut grad.value);
    }
    parts.total = parts.policy + cfg.value_coef * parts.value + cfg.entropy_coef * parts.entropy;
    if !parts.total.is_finite() || !grad.iter().all(|g| g.is_finite()) {
        return Err(PpoError::NonFiniteLoss);
    }
    Ok((parts, grad))
}

/// Loss over the whole batch.
pub fn ppo_loss(params: &PolicyParams, batch: &Batch, cfg: &PpoConfig) -> Result<LossParts, PpoError> {
    let idx: Vec<usize> = (0..batch.len()).collect();
    ppo_loss_and_grad(params, batch, &idx, cfg).map(|(l, _)| l)
}

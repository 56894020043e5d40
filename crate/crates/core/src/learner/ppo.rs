//! Clipped-surrogate PPO: advantage estimation, loss with analytic
//! gradients, and the epoch/minibatch update loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::Features;
use super::network::{PolicyNetwork, ACTION_DIM};
use super::optim::{clip_grad_norm, Adam};
use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    /// Stop the current update once the approximate KL divergence of a
    /// minibatch exceeds this value.
    pub target_kl: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_rate: 1e-4,
            epochs: 4,
            minibatch_size: 256,
            ent_coef: 0.005,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            target_kl: Some(0.05),
        }
    }
}

/// One stored transition ready for optimisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Features,
    /// Pre-squash action that was executed.
    pub u: [f64; ACTION_DIM],
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Generalised advantage estimation over one environment's trajectory.
/// `dones[t]` marks that the episode ended after step `t`; `last_value` is
/// the critic's estimate for the observation following the final step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = last_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Which objective a gradient is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    /// Clipped surrogate, negated for minimisation.
    Policy,
    /// Half squared error of the critic against the return.
    Value,
    /// Mean policy entropy (not negated).
    Entropy,
    /// `policy + vf_coef * value - ent_coef * entropy`.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossStats {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Minibatch losses and, when `grad` is given, the gradient of `term`
/// accumulated into it. Advantages are used as stored.
pub fn loss_and_grad(
    net: &PolicyNetwork,
    batch: &[&Sample],
    cfg: &PpoConfig,
    term: LossTerm,
    mut grad: Option<&mut [f64]>,
) -> Result<LossStats, LearnerError> {
    let (wp, wv, we) = match term {
        LossTerm::Policy => (1.0, 0.0, 0.0),
        LossTerm::Value => (0.0, 1.0, 0.0),
        LossTerm::Entropy => (0.0, 0.0, 1.0),
        LossTerm::Total => (1.0, cfg.vf_coef, -cfg.ent_coef),
    };
    let n = batch.len() as f64;
    let mut stats = LossStats::default();
    let mut d_log_std = [0.0; ACTION_DIM];
    for s in batch {
        let (out, cache) = net.forward_cached(&s.features)?;
        let dist = out.dist;
        let log_prob = dist.log_prob(&s.u);
        let log_ratio = log_prob - s.old_log_prob;
        let ratio = log_ratio.exp();
        let a = s.advantage;
        let unclipped = ratio * a;
        let clipped = ratio.clamp(1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio) * a;
        stats.policy -= unclipped.min(clipped);
        let d_policy_d_logp = if unclipped <= clipped { -ratio * a } else { 0.0 };
        let err = out.value - s.ret;
        stats.value += 0.5 * err * err;
        stats.entropy += dist.entropy();
        stats.approx_kl += (ratio - 1.0) - log_ratio;
        if (ratio - 1.0).abs() > cfg.clip_ratio {
            stats.clip_fraction += 1.0;
        }

        if let Some(g) = grad.as_deref_mut() {
            let mut d_mean = [0.0; ACTION_DIM];
            for k in 0..ACTION_DIM {
                let inv_var = (-2.0 * dist.log_std[k]).exp();
                let diff = s.u[k] - dist.mean[k];
                d_mean[k] = wp * d_policy_d_logp * diff * inv_var / n;
                d_log_std[k] += wp * d_policy_d_logp * (diff * diff * inv_var - 1.0) + we;
            }
            net.backward(&s.features, &cache, d_mean, wv * err / n, g);
        }
    }
    if let Some(g) = grad {
        let at = net.log_std_index();
        for k in 0..ACTION_DIM {
            g[at + k] += d_log_std[k] / n;
        }
    }
    stats.policy /= n;
    stats.value /= n;
    stats.entropy /= n;
    stats.approx_kl /= n;
    stats.clip_fraction /= n;
    stats.total = stats.policy + cfg.vf_coef * stats.value - cfg.ent_coef * stats.entropy;
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Means over the minibatches that were applied.
    pub loss: LossStats,
    pub minibatches: usize,
    pub early_stopped: bool,
    pub grad_norm: f64,
}

/// Normalise advantages, then run the configured epochs of shuffled
/// minibatch Adam steps, stopping early on the KL cap.
pub fn ppo_update<R: Rng>(
    net: &mut PolicyNetwork,
    opt: &mut Adam,
    samples: &mut [Sample],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, LearnerError> {
    if samples.is_empty() {
        return Ok(UpdateStats::default());
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt() + 1e-8;
    for s in samples.iter_mut() {
        s.advantage = (s.advantage - mean) / std;
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grad = vec![0.0; net.num_params()];
    let mut out = UpdateStats::default();
    let mb = cfg.minibatch_size.max(1);
    'epochs: for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(mb) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let stats = loss_and_grad(net, &batch, cfg, LossTerm::Total, Some(&mut grad))?;
            if cfg.target_kl.is_some_and(|kl| stats.approx_kl > kl) {
                out.early_stopped = true;
                break 'epochs;
            }
            let norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            if !norm.is_finite() {
                return Err(LearnerError::NonFinite(format!("gradient norm {norm}")));
            }
            opt.step(net.params_mut(), &grad);
            out.minibatches += 1;
            out.grad_norm += norm;
            let l = &mut out.loss;
            l.policy += stats.policy;
            l.value += stats.value;
            l.entropy += stats.entropy;
            l.total += stats.total;
            l.approx_kl += stats.approx_kl;
            l.clip_fraction += stats.clip_fraction;
        }
    }
    if out.minibatches > 0 {
        let k = out.minibatches as f64;
        let l = &mut out.loss;
        for v in [
            &mut l.policy,
            &mut l.value,
            &mut l.entropy,
            &mut l.total,
            &mut l.approx_kl,
            &mut l.clip_fraction,
            &mut out.grad_norm,
        ] {
            *v /= k;
        }
    }
    Ok(out)
}

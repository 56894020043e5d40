//! Central finite-difference check of the PPO loss gradients.

use crowdnav::learner::features::{EXTRA_FEATURES, HUMAN_FEATURES};
use crowdnav::learner::{loss_and_grad, Features, LossTerm, NetConfig, PolicyNetwork, PpoConfig, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

pub fn random_features(rng: &mut ChaCha8Rng, humans: usize) -> Features {
    Features {
        humans: (0..humans)
            .map(|_| {
                let mut f = [0.0; HUMAN_FEATURES];
                f.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                f
            })
            .collect(),
        lidar: (0..360).map(|_| rng.random_range(0.0..1.0)).collect(),
        extra: {
            let mut e = [0.0; EXTRA_FEATURES];
            e.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            e
        },
    }
}

/// A small network and minibatch whose probability ratios sit strictly
/// inside the clip interval, or strictly outside it, away from its edges.
pub fn fixture(seed: u64, width: usize, outside_clip: bool) -> (PolicyNetwork, Vec<Sample>, PpoConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = PolicyNetwork::new(NetConfig::uniform(width), seed);
    // Give the actor head weights of normal magnitude so the mean carries
    // gradient signal.
    let (actor, _) = net.actor_params();
    for i in actor {
        net.params_mut()[i] = rng.random_range(-0.5..0.5);
    }
    let cfg = PpoConfig::default();
    let samples = (0..6)
        .map(|k| {
            let features = random_features(&mut rng, 1 + k % 4);
            let dist = net.forward(&features).unwrap().dist;
            let u = [
                dist.mean[0] + rng.random_range(-1.0..1.0),
                dist.mean[1] + rng.random_range(-1.0..1.0),
            ];
            let log_ratio: f64 = if outside_clip {
                if k % 2 == 0 {
                    0.4
                } else {
                    -0.4
                }
            } else {
                rng.random_range(-0.1..0.1)
            };
            Sample {
                old_log_prob: dist.log_prob(&u) - log_ratio,
                u,
                advantage: if k % 3 == 0 { -1.3 } else { 0.8 },
                ret: rng.random_range(-2.0..2.0),
                features,
            }
        })
        .collect();
    (net, samples, cfg)
}

pub fn loss_value(net: &PolicyNetwork, batch: &[&Sample], cfg: &PpoConfig, term: LossTerm) -> f64 {
    let s = loss_and_grad(net, batch, cfg, term, None).unwrap();
    match term {
        LossTerm::Policy => s.policy,
        LossTerm::Value => s.value,
        LossTerm::Entropy => s.entropy,
        LossTerm::Total => s.total,
    }
}

/// Norm-wise relative error between the analytic gradient and central
/// differences over every parameter.
pub fn gradient_error(net: &PolicyNetwork, samples: &[Sample], cfg: &PpoConfig, term: LossTerm) -> f64 {
    let batch: Vec<&Sample> = samples.iter().collect();
    let mut analytic = vec![0.0; net.num_params()];
    loss_and_grad(net, &batch, cfg, term, Some(&mut analytic)).unwrap();
    let mut probe = net.clone();
    let mut numeric = vec![0.0; net.num_params()];
    for i in 0..net.num_params() {
        let p0 = probe.params()[i];
        probe.params_mut()[i] = p0 + FD_STEP;
        let up = loss_value(&probe, &batch, cfg, term);
        probe.params_mut()[i] = p0 - FD_STEP;
        let down = loss_value(&probe, &batch, cfg, term);
        probe.params_mut()[i] = p0;
        numeric[i] = (up - down) / (2.0 * FD_STEP);
    }
    let diff: f64 = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

//! Multi-environment PPO training loop.
//!
//! Environments are stepped in a fixed order, each with its own seeded
//! generator for action noise and scenario draws, so a run is a pure
//! function of its configuration and seed.

use std::collections::VecDeque;
use std::fs::File;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::features::encode;
use super::network::{squash, NetConfig, PolicyNetwork};
use super::optim::Adam;
use super::ppo::{compute_gae, ppo_update, PpoConfig, Sample};
use super::LearnerError;
use crate::env::{Curriculum, EnvConfig, EnvError, NavEnv, Scenario, ScenarioSource, TerminationCause};
use crate::sensing::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub ppo: PpoConfig,
    pub net: NetConfig,
    pub n_envs: usize,
    /// Transitions collected per update, summed over environments.
    pub rollout_steps: usize,
    pub total_steps: u64,
    pub seed: u64,
    /// Write a checkpoint every this many updates (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            net: NetConfig::default(),
            n_envs: 4,
            rollout_steps: 2048,
            total_steps: 1_000_000,
            seed: 0,
            checkpoint_every: 10,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::Config(m.to_string()));
        if self.n_envs == 0 {
            return bad("n_envs must be positive");
        }
        if self.rollout_steps < self.n_envs {
            return bad("rollout_steps must be at least n_envs");
        }
        if self.ppo.minibatch_size == 0 || self.ppo.minibatch_size > self.rollout_steps {
            return bad("minibatch_size must be in 1..=rollout_steps");
        }
        if !(self.ppo.learning_rate > 0.0) || !(self.ppo.clip_ratio > 0.0) {
            return bad("learning_rate and clip_ratio must be positive");
        }
        if !(0.0..=1.0).contains(&self.ppo.gamma) || !(0.0..=1.0).contains(&self.ppo.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSetup {
    pub source: ScenarioSource,
    pub env: EnvConfig,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOutputs {
    /// CSV file receiving one row per update.
    pub log_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub update: usize,
    pub steps: u64,
    pub episodes: usize,
    /// Statistics over the most recent (up to) 100 finished episodes.
    pub mean_return: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub stage: usize,
    /// Steps in this rollout with a nonzero zone penalty.
    pub zone_penalty_steps: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub early_stopped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub env: usize,
    pub total_reward: f64,
    pub cause: TerminationCause,
    pub steps: usize,
    pub stage: usize,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub network: PolicyNetwork,
    pub log: Vec<TrainingLogRow>,
    pub episodes: Vec<EpisodeSummary>,
}

impl TrainResult {
    /// Fraction of the last `n` training episodes that reached the goal.
    pub fn recent_success_rate(&self, n: usize) -> f64 {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|e| e.cause == TerminationCause::Goal).count() as f64 / tail.len() as f64
    }
}

struct Slot {
    env: NavEnv,
    obs: Observation,
    rng: ChaCha8Rng,
    episode_return: f64,
    episode_steps: usize,
}

struct Sampler {
    source: ScenarioSource,
    curriculum: Option<Curriculum>,
}

impl Sampler {
    fn new(source: ScenarioSource) -> Result<Self, LearnerError> {
        source.validate().map_err(|e| LearnerError::Config(e.to_string()))?;
        let curriculum = match &source {
            ScenarioSource::Curriculum { schedule, .. } => Some(Curriculum::new(schedule.clone())),
            _ => None,
        };
        Ok(Self { source, curriculum })
    }

    fn stage(&self) -> usize {
        match (&self.source, &self.curriculum) {
            (_, Some(c)) => c.stage().index,
            (ScenarioSource::Random { stage, .. }, None) => stage.index,
            _ => 0,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Scenario, EnvError> {
        Ok(self.source.draw(rng, self.curriculum.as_ref().map(|c| c.stage()))?)
    }
}

/// Train a fresh network with PPO. On an environment or numerical fault the
/// current parameters are flushed to the checkpoint path (if any) before
/// the error is returned.
pub fn train(cfg: &TrainerConfig, setup: &TrainingSetup, outputs: &TrainOutputs) -> Result<TrainResult, LearnerError> {
    cfg.validate()?;
    let mut net = PolicyNetwork::new(cfg.net, cfg.seed);
    let mut opt = Adam::new(net.num_params(), cfg.ppo.learning_rate);
    let mut update_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e_ed0f_0b7e);
    let mut sampler = Sampler::new(setup.source.clone())?;

    let mut log_writer = match &outputs.log_path {
        Some(p) => {
            let file = File::create(p).map_err(|source| LearnerError::Io {
                path: p.clone(),
                source,
            })?;
            Some(csv::Writer::from_writer(file))
        }
        None => None,
    };

    let mut slots = Vec::with_capacity(cfg.n_envs);
    for i in 0..cfg.n_envs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + i as u64));
        let scenario = sampler.draw(&mut rng)?;
        let (env, obs) = NavEnv::reset(scenario, setup.env)?;
        slots.push(Slot {
            env,
            obs,
            rng,
            episode_return: 0.0,
            episode_steps: 0,
        });
    }

    let per_env = cfg.rollout_steps / cfg.n_envs;
    let updates = cfg.total_steps.div_ceil((per_env * cfg.n_envs) as u64) as usize;
    let mut steps = 0u64;
    let mut episodes = Vec::new();
    let mut recent: VecDeque<EpisodeSummary> = VecDeque::new();
    let mut log = Vec::new();

    let save = |net: &PolicyNetwork, updates: usize, steps: u64| -> Result<(), LearnerError> {
        if let Some(p) = &outputs.checkpoint_path {
            let mut ck = Checkpoint::new(net.clone());
            ck.trainer = Some(*cfg);
            ck.env = Some(setup.env);
            ck.updates = updates;
            ck.steps = steps;
            ck.save(p)?;
        }
        Ok(())
    };

    for update in 1..=updates {
        let mut samples = Vec::with_capacity(per_env * cfg.n_envs);
        let mut zone_penalty_steps = 0usize;
        for (i, slot) in slots.iter_mut().enumerate() {
            let mut rewards = Vec::with_capacity(per_env);
            let mut values = Vec::with_capacity(per_env);
            let mut dones = Vec::with_capacity(per_env);
            let start = samples.len();
            for _ in 0..per_env {
                let features = encode(&slot.obs);
                let collected = (|| -> Result<_, LearnerError> {
                    let out = net.forward(&features)?;
                    let u = out.dist.sample(&mut slot.rng);
                    let step = slot.env.step(squash(&u))?;
                    Ok((out, u, step))
                })();
                let (out, u, step) = match collected {
                    Ok(v) => v,
                    Err(e) => {
                        save(&net, update - 1, steps)?;
                        return Err(e);
                    }
                };
                steps += 1;
                let r = step.reward;
                if r.static_zone != 0.0 || r.dynamic_zone != 0.0 {
                    zone_penalty_steps += 1;
                }
                slot.episode_return += r.total;
                slot.episode_steps += 1;
                rewards.push(r.total);
                values.push(out.value);
                dones.push(step.done);
                samples.push(Sample {
                    features,
                    u,
                    old_log_prob: out.dist.log_prob(&u),
                    advantage: 0.0,
                    ret: 0.0,
                });
                if step.done {
                    let summary = EpisodeSummary {
                        env: i,
                        total_reward: slot.episode_return,
                        cause: step.cause,
                        steps: slot.episode_steps,
                        stage: sampler.stage(),
                    };
                    episodes.push(summary);
                    recent.push_back(summary);
                    if recent.len() > 100 {
                        recent.pop_front();
                    }
                    if let Some(c) = sampler.curriculum.as_mut() {
                        c.record(slot.episode_return);
                    }
                    let reset = sampler.draw(&mut slot.rng).and_then(|s| NavEnv::reset(s, setup.env));
                    match reset {
                        Ok((env, obs)) => {
                            slot.env = env;
                            slot.obs = obs;
                        }
                        Err(e) => {
                            save(&net, update - 1, steps)?;
                            return Err(e.into());
                        }
                    }
                    slot.episode_return = 0.0;
                    slot.episode_steps = 0;
                } else {
                    slot.obs = step.observation;
                }
            }
            let last_value = net.forward(&encode(&slot.obs))?.value;
            let (adv, ret) = compute_gae(&rewards, &values, &dones, last_value, cfg.ppo.gamma, cfg.ppo.gae_lambda);
            for (k, s) in samples[start..].iter_mut().enumerate() {
                s.advantage = adv[k];
                s.ret = ret[k];
            }
        }

        let stats = match ppo_update(&mut net, &mut opt, &mut samples, &cfg.ppo, &mut update_rng) {
            Ok(s) => s,
            Err(e) => {
                save(&net, update - 1, steps)?;
                return Err(e);
            }
        };

        let k = recent.len().max(1) as f64;
        let row = TrainingLogRow {
            update,
            steps,
            episodes: episodes.len(),
            mean_return: recent.iter().map(|e| e.total_reward).sum::<f64>() / k,
            success_rate: recent.iter().filter(|e| e.cause == TerminationCause::Goal).count() as f64 / k,
            collision_rate: recent.iter().filter(|e| e.cause == TerminationCause::Collision).count() as f64 / k,
            stage: sampler.stage(),
            zone_penalty_steps,
            policy_loss: stats.loss.policy,
            value_loss: stats.loss.value,
            entropy: stats.loss.entropy,
            approx_kl: stats.loss.approx_kl,
            clip_fraction: stats.loss.clip_fraction,
            early_stopped: stats.early_stopped,
        };
        if let Some(w) = log_writer.as_mut() {
            w.serialize(row)?;
            w.flush().map_err(|source| LearnerError::Io {
                path: outputs.log_path.clone().unwrap_or_default(),
                source,
            })?;
        }
        log.push(row);
        if cfg.checkpoint_every > 0 && update % cfg.checkpoint_every == 0 {
            save(&net, update, steps)?;
        }
    }
    save(&net, updates, steps)?;
    Ok(TrainResult {
        network: net,
        log,
        episodes,
    })
}

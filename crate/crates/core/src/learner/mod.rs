//! Policy learning: actor-critic network with hand-written gradients, PPO
//! updates, the multi-environment training loop and checkpoints.

pub mod checkpoint;
pub mod features;
pub mod network;
pub mod optim;
pub mod ppo;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::env::EnvError;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use features::{encode, Features};
pub use network::{squash, DiagGaussian, NetConfig, PolicyNetwork, PolicyOutput};
pub use optim::Adam;
pub use ppo::{compute_gae, loss_and_grad, ppo_update, LossStats, LossTerm, PpoConfig, Sample, UpdateStats};
pub use train::{train, EpisodeSummary, TrainOutputs, TrainResult, TrainerConfig, TrainingLogRow, TrainingSetup};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training fault: {0}")]
    NonFinite(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("environment fault: {0}")]
    Env(#[from] EnvError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("training log: {0}")]
    Csv(#[from] csv::Error),
    #[error("checkpoint format: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
}

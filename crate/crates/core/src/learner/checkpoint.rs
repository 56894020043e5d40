//! Versioned JSON checkpoints holding the network and the configuration it
//! was trained with.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::PolicyNetwork;
use super::train::TrainerConfig;
use super::LearnerError;
use crate::env::EnvConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub network: PolicyNetwork,
    pub trainer: Option<TrainerConfig>,
    pub env: Option<EnvConfig>,
    pub updates: usize,
    pub steps: u64,
}

impl Checkpoint {
    pub fn new(network: PolicyNetwork) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            network,
            trainer: None,
            env: None,
            updates: 0,
            steps: 0,
        }
    }

    /// Write atomically: serialise to a sibling temporary file, then rename.
    pub fn save(&self, path: &Path) -> Result<(), LearnerError> {
        let io = |source| LearnerError::Io {
            path: path.to_path_buf(),
            source,
        };
        let text = serde_json::to_string(self)?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, LearnerError> {
        let text = fs::read_to_string(path).map_err(|source| LearnerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, LearnerError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != CHECKPOINT_VERSION {
            return Err(LearnerError::UnsupportedVersion(header.version));
        }
        let mut ck: Checkpoint = serde_json::from_str(text)?;
        ck.network = ck.network.rebuild()?;
        Ok(ck)
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, RunError};
use crate::env::{EpisodeTrace, Transition};
use crate::ppo::{Adam, PolicyParams};
use crate::seeds::RngState;

pub const CHECKPOINT_VERSION: u32 = 1;

/// A completed episode waiting for the next update, with its state vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingEpisode {
    pub task_id: String,
    pub transitions: Vec<Transition>,
    pub states: Vec<Vec<f64>>,
}

impl PendingEpisode {
    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        Self {
            task_id: trace.task_id.clone(),
            transitions: trace.transitions.clone(),
            states: trace.transitions.iter().map(|t| t.state.clone()).collect(),
        }
    }

    pub fn to_trace(&self) -> EpisodeTrace {
        let mut transitions = self.transitions.clone();
        for (t, s) in transitions.iter_mut().zip(&self.states) {
            t.state = s.clone();
        }
        EpisodeTrace {
            task_id: self.task_id.clone(),
            transitions,
            aborted: None,
        }
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub params: PolicyParams,
    pub adam: Adam,
    pub learning_rate: f64,
    pub episodes_done: u64,
    pub updates_done: u64,
    pub epoch: u64,
    /// Train-split indices for the current epoch; `epoch_pos` of them are used.
    pub epoch_order: Vec<usize>,
    pub epoch_pos: usize,
    pub env_rng: RngState,
    pub policy_rng: RngState,
    pub update_rng: RngState,
    pub pending: Vec<PendingEpisode>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String, RunError> {
        serde_json::to_string(self)
            .map(|s| s + "\n")
            .map_err(|e| RunError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), RunError> {
        let text = self.to_json()?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
    }

    /// A missing or unreadable file is a configuration error.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("checkpoint {}: {e}", path.display())))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| RunError::CheckpointIncompatible(format!("{}: {e}", path.display())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(RunError::CheckpointIncompatible(format!(
                "{}: version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                ck.version
            )));
        }
        Ok(ck)
    }

    /// Rejects parameters that do not fit the configured state size or width.
    pub fn check_shape(&self, dim: usize, hidden: usize) -> Result<(), RunError> {
        let got_hidden = self.params.policy.sizes.get(1).copied().unwrap_or(0);
        if self.params.dim() != dim || got_hidden != hidden {
            return Err(RunError::CheckpointIncompatible(format!(
                "checkpoint has state dim {} and hidden width {got_hidden}, config expects {dim} and {hidden}",
                self.params.dim()
            )));
        }
        if self.adam.m.len() != self.params.param_count() {
            return Err(RunError::CheckpointIncompatible("optimizer state does not match parameters".into()));
        }
        Ok(())
    }
}

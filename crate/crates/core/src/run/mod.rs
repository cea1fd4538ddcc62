//! Run configuration, on-disk artifacts, and the train / evaluate / compare /
//! replay workflows behind the command line.

mod checkpoint;
mod commands;
mod config;
mod manifest;
mod train;

pub use checkpoint::{Checkpoint, PendingEpisode, CHECKPOINT_VERSION};
pub use commands::{
    build_pipeline, compare_files, evaluate, inspect_corpus, load_split_corpus, replay, EvalOutcome, ReplaySummary,
};
pub use config::{content_hash, load_config, CorpusSection, LoadedConfig, RewriteSection, RunConfig};
pub use manifest::{Artifact, RunManifest, RunStatus, MANIFEST_FILE};
pub use train::{train, EpisodeLog, TrainOutcome, FINAL_CHECKPOINT, TRAIN_LOG, TRACES};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("incompatible checkpoint: {0}")]
    CheckpointIncompatible(String),
    #[error("backend error: {0}")]
    Backend(String),
    /// Training stopped on an infrastructure failure after writing a resumable checkpoint.
    #[error("training halted after {episodes_done} episodes ({cause}); resume from {}", checkpoint.display())]
    Halted {
        episodes_done: u64,
        checkpoint: std::path::PathBuf,
        cause: String,
    },
    #[error("evaluation mismatch: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Io(String),
    #[error("training failed: {0}")]
    Training(String),
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::CheckpointIncompatible(_) => 2,
            RunError::Backend(_) | RunError::Halted { .. } => 3,
            RunError::Mismatch(_) => 4,
            RunError::Io(_) | RunError::Training(_) => 1,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

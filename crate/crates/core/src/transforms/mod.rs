//! The three prompt transformations an agent can choose between.

mod ga;
mod rewrite;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::gateway::{DecodingParams, GatewayError, TextBackend};
use crate::sandbox::{Executor, SandboxError};
use crate::seeds::Rng;

pub use ga::{
    crossover, detokenize, ga_mutate, index_shuffle, mutate, tokenize_prompt, tournament_select, GaConfig,
    GaOutcome,
};
pub use rewrite::{semantic_rewrite, KeywordsMode, RewriteConfig, RewriteOutcome, DEFAULT_META_PROMPT};

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("crossover cut {cut} outside 0..={len}")]
    IndexOutOfRange { cut: usize, len: usize },
    #[error("mutation vocabulary is empty")]
    EmptyVocab,
    #[error("transform config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum ActionId {
    DirectGeneration = 0,
    GeneticMutation = 1,
    SemanticRewrite = 2,
}

impl ActionId {
    pub const COUNT: usize = 3;
    pub const ALL: [ActionId; 3] = [
        ActionId::DirectGeneration,
        ActionId::GeneticMutation,
        ActionId::SemanticRewrite,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionId::DirectGeneration => "direct_generation",
            ActionId::GeneticMutation => "genetic_mutation",
            ActionId::SemanticRewrite => "semantic_rewrite",
        })
    }
}

impl FromStr for ActionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| format!("unknown action {s:?}"))
    }
}

/// Everything a transform may touch. Each episode owns its own `rng`.
pub struct TransformContext<'a> {
    pub task: &'a Task,
    pub keywords: BTreeSet<String>,
    pub rng: &'a mut Rng,
    pub generator: &'a dyn TextBackend,
    pub rewriter: &'a dyn TextBackend,
    pub executor: &'a dyn Executor,
    pub ga: &'a GaConfig,
    pub rewrite: &'a RewriteConfig,
    pub decoding: DecodingParams,
    pub timeout_ms: u64,
    pub workers: usize,
}

/// Result of one transform call, with bookkeeping for traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutput {
    pub prompt: String,
    /// Sandbox jobs spent inside the transform (GA fitness calls).
    pub sandbox_jobs: usize,
    /// `Some(accepted)` for semantic rewrites.
    pub rewrite_accepted: Option<bool>,
}

pub fn apply_transform(
    prompt: &str,
    action: ActionId,
    ctx: &mut TransformContext<'_>,
) -> Result<TransformOutput, TransformError> {
    match action {
        ActionId::DirectGeneration => Ok(TransformOutput {
            prompt: prompt.to_string(),
            sandbox_jobs: 0,
            rewrite_accepted: None,
        }),
        ActionId::GeneticMutation => {
            let out = ga_mutate(prompt, ctx)?;
            Ok(TransformOutput {
                prompt: out.prompt,
                sandbox_jobs: out.jobs_used,
                rewrite_accepted: None,
            })
        }
        ActionId::SemanticRewrite => {
            let out = semantic_rewrite(prompt, ctx)?;
            Ok(TransformOutput {
                prompt: out.prompt,
                sandbox_jobs: 0,
                rewrite_accepted: Some(out.accepted),
            })
        }
    }
}

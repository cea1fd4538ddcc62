//! The TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunError;
use crate::corpus::SplitSpec;
use crate::embedding::EmbedderConfig;
use crate::env::EnvConfig;
use crate::gateway::{BackendConfig, BackendKind};
use crate::policy::PolicyKind;
use crate::ppo::PpoConfig;
use crate::sandbox::ExecutorConfig;
use crate::seeds::derive_seed;
use crate::transforms::{GaConfig, RewriteConfig};

/// Corpus file and how to split it. Give either `train_n` and `test_n`, or `train_frac`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    #[serde(default)]
    pub train_n: Option<usize>,
    #[serde(default)]
    pub test_n: Option<usize>,
    #[serde(default)]
    pub train_frac: Option<f64>,
    /// Defaults to a seed derived from `master_seed`.
    #[serde(default)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewriteSection {
    #[serde(flatten)]
    pub config: RewriteConfig,
    /// UTF-8 file holding the meta-prompt template; overrides `meta_prompt_template`.
    #[serde(default)]
    pub meta_prompt_path: Option<PathBuf>,
}

fn default_workers() -> usize {
    1
}

fn default_policy() -> PolicyKind {
    PolicyKind::Ppo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Training episodes; required.
    pub episodes: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Write an intermediate checkpoint every this many episodes; 0 keeps only the final one.
    #[serde(default)]
    pub checkpoint_every: u64,
    /// Default policy for `evaluate` when none is given.
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    pub corpus: CorpusSection,
    pub generator: BackendConfig,
    pub rewriter: BackendConfig,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    pub executor: ExecutorConfig,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub rewrite: RewriteSection,
}

/// A parsed config plus where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    /// Paths resolved against the file's directory.
    pub config: RunConfig,
    /// As written, for echoing into artifacts that must not depend on location.
    pub raw: RunConfig,
    pub path: PathBuf,
    /// Git blob hash of the file bytes.
    pub hash: String,
}

/// `sha256("blob <len>\0" ++ bytes)`, hex encoded.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    /// Make every relative path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        resolve(base, &mut self.corpus.path);
        for b in [&mut self.generator, &mut self.rewriter] {
            if let BackendKind::ScriptedMock { script_path } = &mut b.kind {
                resolve(base, script_path);
            }
        }
        match &mut self.executor {
            ExecutorConfig::ChildProcess {
                interpreter_path,
                harness_path,
            } => {
                // bare interpreter names are looked up on PATH at spawn time
                if interpreter_path.components().count() > 1 {
                    resolve(base, interpreter_path);
                }
                resolve(base, harness_path);
            }
            ExecutorConfig::InProcessFake { rules_path } => resolve(base, rules_path),
        }
        if let Some(p) = &mut self.rewrite.meta_prompt_path {
            resolve(base, p);
        }
    }

    pub fn split_spec(&self) -> Result<SplitSpec, RunError> {
        let c = &self.corpus;
        let seed = c
            .split_seed
            .unwrap_or_else(|| derive_seed(self.master_seed, "split", 0));
        match (c.train_n, c.test_n, c.train_frac) {
            (Some(tr), Some(te), None) => Ok(SplitSpec::fixed(tr, te, seed)),
            (None, None, Some(f)) => Ok(SplitSpec::fractional(f, seed)),
            _ => Err(RunError::Config(
                "corpus: give either train_n and test_n, or train_frac".into(),
            )),
        }
    }

    /// Checks values and that every referenced input file exists. No side effects.
    pub fn validate(&self) -> Result<(), RunError> {
        let cfg = |e: String| RunError::Config(e);
        self.split_spec()?;
        if self.workers == 0 {
            return Err(cfg("workers must be at least 1".into()));
        }
        self.env.validate().map_err(|e| cfg(e.to_string()))?;
        self.ppo.validate().map_err(|e| cfg(e.to_string()))?;
        self.ga.validate().map_err(|e| cfg(e.to_string()))?;
        if self.rewrite.meta_prompt_path.is_none() {
            self.rewrite.config.validate().map_err(|e| cfg(e.to_string()))?;
        }
        for (name, b) in [("generator", &self.generator), ("rewriter", &self.rewriter)] {
            b.validate().map_err(|e| cfg(format!("{name}: {e}")))?;
        }
        if self.embedder.dim() < 8 {
            return Err(cfg(format!("embedder dim {} must be at least 8", self.embedder.dim())));
        }
        for p in self.input_paths() {
            if !p.exists() {
                return Err(cfg(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    fn input_paths(&self) -> Vec<&Path> {
        let mut v = vec![self.corpus.path.as_path()];
        for b in [&self.generator, &self.rewriter] {
            if let BackendKind::ScriptedMock { script_path } = &b.kind {
                v.push(script_path);
            }
        }
        match &self.executor {
            ExecutorConfig::ChildProcess {
                interpreter_path,
                harness_path,
            } => {
                if interpreter_path.components().count() > 1 {
                    v.push(interpreter_path);
                }
                v.push(harness_path);
            }
            ExecutorConfig::InProcessFake { rules_path } => v.push(rules_path),
        }
        if let Some(p) = &self.rewrite.meta_prompt_path {
            v.push(p);
        }
        v
    }

    /// Rewrite settings with the template file, if any, read in.
    pub fn rewrite_config(&self) -> Result<RewriteConfig, RunError> {
        let mut rc = self.rewrite.config.clone();
        if let Some(p) = &self.rewrite.meta_prompt_path {
            rc.meta_prompt_template = std::fs::read_to_string(p)
                .map_err(|e| RunError::Config(format!("{}: {e}", p.display())))?;
        }
        rc.validate().map_err(|e| RunError::Config(e.to_string()))?;
        Ok(rc)
    }

    pub fn train_dir(&self) -> PathBuf {
        self.output_dir.join("train")
    }

    pub fn eval_dir(&self, kind: PolicyKind) -> PathBuf {
        self.output_dir.join(format!("eval-{kind}"))
    }
}

/// Read, parse, resolve and validate a config file.
pub fn load_config(path: &Path) -> Result<LoadedConfig, RunError> {
    let bytes = std::fs::read(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let raw = RunConfig::parse(text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    let mut config = raw.clone();
    let abs = std::path::absolute(path).map_err(|e| RunError::Config(e.to_string()))?;
    let base = abs.parent().map(Path::to_path_buf).unwrap_or_default();
    config.resolve_paths(&base);
    config.validate()?;
    Ok(LoadedConfig {
        config,
        raw,
        path: abs,
        hash: content_hash(&bytes),
    })
}

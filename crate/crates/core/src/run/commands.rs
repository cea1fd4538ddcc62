use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::clear_artifacts;
use super::{io_err, load_config, Checkpoint, LoadedConfig, RunConfig, RunError, RunManifest, FINAL_CHECKPOINT, MANIFEST_FILE, TRACES};
use crate::corpus::{load_corpus, split_corpus, Corpus, CorpusFormat, Split, SplitCounts, Task};
use crate::env::{read_transitions, replay_transition, write_transitions, Pipeline};
use crate::eval::{compare_reports, evaluate_policy, Comparison, EvalError, EvalReport, EvalSetup};
use crate::gateway::Backend;
use crate::policy::{PolicyKind, RefinementPolicy};

pub const REPORT_FILE: &str = "report.json";

/// Instantiate backends, executor and embedder. Connects to nothing.
pub fn build_pipeline(cfg: &RunConfig) -> Result<Pipeline, RunError> {
    let backend = |name: &str, b| Backend::from_config(b).map_err(|e| RunError::Config(format!("{name}: {e}")));
    Ok(Pipeline {
        generator: Box::new(backend("generator", &cfg.generator)?),
        rewriter: Box::new(backend("rewriter", &cfg.rewriter)?),
        executor: cfg.executor.build().map_err(|e| RunError::Config(format!("executor: {e}")))?,
        embedder: cfg.embedder.build().map_err(|e| RunError::Config(format!("embedder: {e}")))?,
        ga: cfg.ga.clone(),
        rewrite: cfg.rewrite_config()?,
        workers: cfg.workers,
    })
}

pub fn load_split_corpus(cfg: &RunConfig) -> Result<Corpus, RunError> {
    let raw = load_corpus(&cfg.corpus.path, CorpusFormat::JsonLines).map_err(|e| RunError::Config(e.to_string()))?;
    split_corpus(&raw, cfg.split_spec()?).map_err(|e| RunError::Config(e.to_string()))
}

fn eval_error(e: EvalError) -> RunError {
    match e {
        EvalError::TaskSetMismatch(m) => RunError::Mismatch(m),
        other => RunError::Backend(other.to_string()),
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub manifest: RunManifest,
}

/// Evaluate `kind` on the test split and write report, traces and manifest
/// under `<output_dir>/eval-<kind>/`. PPO reads `checkpoint`, defaulting to
/// the final training checkpoint.
pub fn evaluate(loaded: &LoadedConfig, kind: PolicyKind, checkpoint: Option<&Path>) -> Result<EvalOutcome, RunError> {
    let cfg = &loaded.config;
    let corpus = load_split_corpus(cfg)?;
    let tasks: Vec<&Task> = corpus.split(Split::Test).collect();
    if tasks.is_empty() {
        return Err(RunError::Config("test split is empty".into()));
    }
    let mut manifest = RunManifest::begin("evaluate", loaded)?;
    let policy = match RefinementPolicy::baseline(kind) {
        Some(p) => p,
        None => {
            let path = checkpoint.map_or_else(|| cfg.train_dir().join(FINAL_CHECKPOINT), Path::to_path_buf);
            let ck = Checkpoint::load(&path)?;
            ck.check_shape(cfg.embedder.dim(), cfg.ppo.hidden)?;
            if ck.config_hash != loaded.hash {
                manifest
                    .notes
                    .push(format!("checkpoint {} was trained under config hash {}", path.display(), ck.config_hash));
            }
            manifest.notes.push(format!("checkpoint: {}", path.display()));
            RefinementPolicy::Ppo(ck.params)
        }
    };
    let pipeline = build_pipeline(cfg)?;
    let setup = EvalSetup {
        pipeline: &pipeline,
        env: &cfg.env,
        step_cap: cfg.env.eval_max_steps,
        master_seed: cfg.master_seed,
        workers: cfg.workers,
        dataset: corpus.name.clone(),
    };
    let (report, traces) = evaluate_policy(&policy, &tasks, &setup).map_err(eval_error)?;
    for a in &report.aborted {
        manifest.notes.push(format!("aborted {}: {}", a.task_id, a.diagnostic));
    }

    let dir = cfg.eval_dir(kind);
    clear_artifacts(&dir, |n| n == REPORT_FILE || n == TRACES)?;
    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let report_path = dir.join(REPORT_FILE);
    let text = serde_json::to_string_pretty(&report).map_err(|e| RunError::Io(e.to_string()))?;
    std::fs::write(&report_path, text + "\n").map_err(|e| io_err(&report_path, e))?;
    let trace_path = dir.join(TRACES);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&trace_path).map_err(|e| io_err(&trace_path, e))?);
    for t in &traces {
        write_transitions(&mut out, &t.transitions).map_err(|e| io_err(&trace_path, e))?;
    }
    out.flush().map_err(|e| io_err(&trace_path, e))?;
    drop(out);
    let manifest = manifest.finish(&dir)?;
    Ok(EvalOutcome {
        report,
        report_path,
        manifest,
    })
}

fn load_report(path: &Path) -> Result<EvalReport, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

pub fn compare_files(a: &Path, b: &Path) -> Result<Comparison, RunError> {
    compare_reports(&load_report(a)?, &load_report(b)?).map_err(|e| match e {
        EvalError::TaskSetMismatch(m) => RunError::Mismatch(m),
        other => RunError::Config(other.to_string()),
    })
}

/// Split counts of a corpus file, or of a run config's corpus after splitting.
pub fn inspect_corpus(path: &Path) -> Result<SplitCounts, RunError> {
    if path.extension().is_some_and(|e| e == "toml") {
        let loaded = load_config(path)?;
        return Ok(load_split_corpus(&loaded.config)?.counts());
    }
    let corpus = load_corpus(path, CorpusFormat::JsonLines).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(corpus.counts())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub trace: PathBuf,
    pub checked: usize,
    pub mismatches: Vec<String>,
}

/// Re-execute every step of a trace file and compare rewards and pass
/// ratios. The run config is found through the sibling manifest.
pub fn replay(trace: &Path) -> Result<ReplaySummary, RunError> {
    let dir = trace.parent().unwrap_or(Path::new("."));
    let manifest = RunManifest::load(&dir.join(MANIFEST_FILE))?;
    let loaded = load_config(&manifest.config_path)?;
    if loaded.hash != manifest.config_hash {
        return Err(RunError::Mismatch(format!(
            "{} changed since the run (hash {} vs {})",
            manifest.config_path.display(),
            loaded.hash,
            manifest.config_hash
        )));
    }
    let cfg = &loaded.config;
    let corpus = load_split_corpus(cfg)?;
    let by_id: BTreeMap<&str, &Task> = corpus.tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let pipeline = build_pipeline(cfg)?;
    let transitions = read_transitions(trace).map_err(|e| RunError::Config(e.to_string()))?;
    let mut mismatches = Vec::new();
    for t in &transitions {
        let label = format!("{} episode {} step {}", t.task_id, t.episode, t.step);
        let Some(task) = by_id.get(t.task_id.as_str()) else {
            mismatches.push(format!("{label}: task not in corpus"));
            continue;
        };
        let (reward, verdict) =
            replay_transition(&pipeline, task, t, &cfg.env).map_err(|e| RunError::Backend(format!("{label}: {e}")))?;
        if reward.to_bits() != t.reward.to_bits() || verdict.pass_ratio.to_bits() != t.pass_ratio.to_bits() {
            mismatches.push(format!(
                "{label}: recorded reward {} / rho {}, replayed {reward} / {}",
                t.reward, t.pass_ratio, verdict.pass_ratio
            ));
        }
    }
    Ok(ReplaySummary {
        trace: trace.to_path_buf(),
        checked: transitions.len(),
        mismatches,
    })
}

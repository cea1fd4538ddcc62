use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::commands::{build_pipeline, load_split_corpus};
use super::manifest::clear_artifacts;
use super::{io_err, Checkpoint, LoadedConfig, PendingEpisode, RunError, RunManifest, RunStatus, CHECKPOINT_VERSION};
use crate::corpus::{Split, Task};
use crate::embedding::StateVector;
use crate::env::{episode_return, run_episode, write_transitions, EnvError, Environment, EpisodeTrace, Pipeline};
use crate::ppo::{policy_forward, ppo_update_with_retry, sample_action, Adam, Batch, PolicyParams, UpdateStats};
use crate::seeds::{substream, Rng, RngState};
use crate::transforms::ActionId;

pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const TRACES: &str = "traces.jsonl";
pub const FINAL_CHECKPOINT: &str = "checkpoint-final.json";
const HALT_CHECKPOINT: &str = "checkpoint-halt.json";

fn is_train_artifact(name: &str) -> bool {
    name == TRAIN_LOG || name == TRACES || (name.starts_with("checkpoint-") && name.ends_with(".json"))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub task_id: String,
    /// Undiscounted sum of step rewards.
    pub episode_return: f64,
    pub steps: usize,
    pub final_pass_ratio: f64,
    pub solved: bool,
    pub actions: Vec<ActionId>,
    /// Present when a PPO update ran right after this episode.
    #[serde(default)]
    pub update: Option<UpdateStats>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub manifest: RunManifest,
    pub checkpoint: Checkpoint,
    /// Every episode of the run so far, including ones before a resume.
    pub log: Vec<EpisodeLog>,
}

struct Streams {
    env: Rng,
    policy: Rng,
    update: Rng,
}

fn epoch_order(master: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(master, "sampling", epoch));
    order
}

fn fresh_checkpoint(loaded: &LoadedConfig, n_train: usize) -> Result<Checkpoint, RunError> {
    let cfg = &loaded.config;
    let params = PolicyParams::init(cfg.embedder.dim(), cfg.ppo.hidden, &mut substream(cfg.master_seed, "policy-init", 0));
    Ok(Checkpoint {
        version: CHECKPOINT_VERSION,
        config_hash: loaded.hash.clone(),
        config: serde_json::to_value(&loaded.raw).map_err(|e| RunError::Io(e.to_string()))?,
        adam: Adam::new(&params),
        params,
        learning_rate: cfg.ppo.learning_rate,
        episodes_done: 0,
        updates_done: 0,
        epoch: 0,
        epoch_order: epoch_order(cfg.master_seed, 0, n_train),
        epoch_pos: 0,
        env_rng: RngState::capture(&substream(cfg.master_seed, "env", 0)),
        policy_rng: RngState::capture(&substream(cfg.master_seed, "policy", 0)),
        update_rng: RngState::capture(&substream(cfg.master_seed, "update", 0)),
        pending: Vec::new(),
    })
}

fn restore(ck: &Checkpoint) -> Result<Streams, RunError> {
    let r = |s: &RngState| s.restore().map_err(|e| RunError::CheckpointIncompatible(format!("rng state: {e}")));
    Ok(Streams {
        env: r(&ck.env_rng)?,
        policy: r(&ck.policy_rng)?,
        update: r(&ck.update_rng)?,
    })
}

fn capture(ck: &mut Checkpoint, s: &Streams) {
    ck.env_rng = RngState::capture(&s.env);
    ck.policy_rng = RngState::capture(&s.policy);
    ck.update_rng = RngState::capture(&s.update);
}

/// Keep only the lines of `path` that `keep` accepts; missing file means nothing to keep.
fn truncate_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, keep: impl Fn(&T) -> bool) -> Result<Vec<String>, RunError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut kept = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: T = serde_json::from_str(&line).map_err(|e| io_err(path, e))?;
        if keep(&v) {
            kept.push(line);
        }
    }
    let mut text = kept.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))?;
    Ok(kept)
}

fn open_append(path: &Path) -> Result<BufWriter<std::fs::File>, RunError> {
    let f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    Ok(BufWriter::new(f))
}

fn run_one(
    pipeline: &Pipeline,
    loaded: &LoadedConfig,
    params: &PolicyParams,
    task: &Task,
    episode: u64,
    streams: &mut Streams,
) -> Result<EpisodeTrace, RunError> {
    let mut env = Environment::new(pipeline, &loaded.config.env);
    let policy_rng = &mut streams.policy;
    let mut chooser = |s: &StateVector| {
        let (probs, value) = policy_forward(params, &s.values).map_err(|e| EnvError::Config(e.to_string()))?;
        let (action, log_prob) = sample_action(&probs, policy_rng).map_err(|e| EnvError::Config(e.to_string()))?;
        Ok((action, Some(log_prob), Some(value)))
    };
    run_episode(&mut env, task, episode, &mut chooser, &mut streams.env).map_err(|e| match e {
        EnvError::Embed(e) => RunError::Backend(e.to_string()),
        other => RunError::Training(other.to_string()),
    })
}

/// Run the configured number of training episodes, optionally continuing
/// from a checkpoint. Writes checkpoints, the episode log, step traces and
/// a manifest under `<output_dir>/train/`.
///
/// An infrastructure failure mid-episode discards that episode, writes a
/// checkpoint from just before it and returns [`RunError::Halted`].
pub fn train(loaded: &LoadedConfig, resume: Option<&Path>) -> Result<TrainOutcome, RunError> {
    let cfg = &loaded.config;
    let corpus = load_split_corpus(cfg)?;
    let tasks: Vec<&Task> = corpus.split(Split::Train).collect();
    if tasks.is_empty() {
        return Err(RunError::Config("training split is empty".into()));
    }
    let mut manifest = RunManifest::begin("train", loaded)?;
    let dir = cfg.train_dir();

    let mut ck = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            ck.check_shape(cfg.embedder.dim(), cfg.ppo.hidden)?;
            if ck.epoch_order.len() != tasks.len() {
                return Err(RunError::CheckpointIncompatible(format!(
                    "checkpoint samples from {} training tasks, config has {}",
                    ck.epoch_order.len(),
                    tasks.len()
                )));
            }
            if ck.config_hash != loaded.hash {
                manifest
                    .notes
                    .push(format!("resumed checkpoint was written under config hash {}", ck.config_hash));
            }
            manifest.resumed_from = Some(std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf()));
            ck
        }
        None => fresh_checkpoint(loaded, tasks.len())?,
    };
    let mut streams = restore(&ck)?;

    std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let log_path = dir.join(TRAIN_LOG);
    let trace_path = dir.join(TRACES);
    let mut log: Vec<EpisodeLog> = Vec::new();
    if resume.is_some() {
        // drop anything logged after the checkpoint was taken
        let done = ck.episodes_done;
        for line in truncate_jsonl::<EpisodeLog>(&log_path, |l| l.episode < done)? {
            log.push(serde_json::from_str(&line).map_err(|e| io_err(&log_path, e))?);
        }
        truncate_jsonl::<crate::env::Transition>(&trace_path, |t| t.episode < done)?;
    } else {
        clear_artifacts(&dir, is_train_artifact)?;
    }
    let _ = std::fs::remove_file(dir.join(HALT_CHECKPOINT));
    let mut log_out = open_append(&log_path)?;
    let mut trace_out = open_append(&trace_path)?;

    let mut pipeline: Option<Pipeline> = None;
    while ck.episodes_done < cfg.episodes {
        if ck.epoch_pos == ck.epoch_order.len() {
            ck.epoch += 1;
            ck.epoch_order = epoch_order(cfg.master_seed, ck.epoch, tasks.len());
            ck.epoch_pos = 0;
        }
        if pipeline.is_none() {
            pipeline = Some(build_pipeline(cfg)?);
        }
        let pipe = pipeline.as_ref().expect("pipeline built above");
        let task = tasks[ck.epoch_order[ck.epoch_pos]];
        capture(&mut ck, &streams);
        let before = ck.clone();

        let trace = run_one(pipe, loaded, &ck.params, task, ck.episodes_done, &mut streams)?;
        if let Some(cause) = trace.aborted {
            log_out.flush().map_err(|e| io_err(&log_path, e))?;
            trace_out.flush().map_err(|e| io_err(&trace_path, e))?;
            drop((log_out, trace_out));
            let halt = dir.join(HALT_CHECKPOINT);
            before.save(&halt)?;
            manifest.status = RunStatus::Halted;
            manifest.resume_from = Some(halt.clone());
            manifest.notes.push(format!("episode {} on {} aborted: {cause}", before.episodes_done, task.id));
            manifest.finish(&dir)?;
            return Err(RunError::Halted {
                episodes_done: before.episodes_done,
                checkpoint: halt,
                cause,
            });
        }

        ck.epoch_pos += 1;
        ck.episodes_done += 1;
        write_transitions(&mut trace_out, &trace.transitions).map_err(|e| io_err(&trace_path, e))?;
        let last = trace.transitions.last();
        let mut entry = EpisodeLog {
            episode: ck.episodes_done - 1,
            task_id: task.id.clone(),
            episode_return: episode_return(&trace).map_err(|e| RunError::Training(e.to_string()))?,
            steps: trace.transitions.len(),
            final_pass_ratio: last.map_or(0.0, |t| t.pass_ratio),
            solved: trace.solved(),
            actions: trace.transitions.iter().map(|t| t.action).collect(),
            update: None,
        };
        ck.pending.push(PendingEpisode::from_trace(&trace));

        if ck.pending.len() >= cfg.ppo.update_every_episodes {
            let episodes: Vec<EpisodeTrace> = ck.pending.iter().map(PendingEpisode::to_trace).collect();
            let batch = Batch::from_episodes(&episodes, &cfg.ppo).map_err(|e| RunError::Training(e.to_string()))?;
            let out = ppo_update_with_retry(&ck.params, &ck.adam, &batch, &cfg.ppo, ck.learning_rate, &mut streams.update)
                .map_err(|e| RunError::Training(format!("update {}: {e}", ck.updates_done + 1)))?;
            ck.params = out.params;
            ck.adam = out.adam;
            ck.learning_rate = out.stats.learning_rate;
            ck.updates_done += 1;
            ck.pending.clear();
            entry.update = Some(out.stats);
        }
        let line = serde_json::to_string(&entry).map_err(|e| RunError::Io(e.to_string()))?;
        writeln!(log_out, "{line}").map_err(|e| io_err(&log_path, e))?;
        log.push(entry);

        if cfg.checkpoint_every > 0 && ck.episodes_done % cfg.checkpoint_every == 0 && ck.episodes_done < cfg.episodes {
            log_out.flush().map_err(|e| io_err(&log_path, e))?;
            trace_out.flush().map_err(|e| io_err(&trace_path, e))?;
            capture(&mut ck, &streams);
            ck.save(&dir.join(format!("checkpoint-{:06}.json", ck.episodes_done)))?;
        }
    }
    log_out.flush().map_err(|e| io_err(&log_path, e))?;
    trace_out.flush().map_err(|e| io_err(&trace_path, e))?;
    drop((log_out, trace_out));
    capture(&mut ck, &streams);
    ck.save(&dir.join(FINAL_CHECKPOINT))?;
    let manifest = manifest.finish(&dir)?;
    Ok(TrainOutcome {
        manifest,
        checkpoint: ck,
        log,
    })
}


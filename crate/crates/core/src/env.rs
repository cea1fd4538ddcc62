//! Single-task refinement episodes: observe, transform, generate, execute, reward.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{extract_keywords, Task};
use crate::embedding::{EmbedError, Embedder, StateVector};
use crate::gateway::{extract_code, DecodingParams, GenRequest, Role, TextBackend};
use crate::sandbox::{self, Executor, SandboxJob, SandboxVerdict, Status, DEFAULT_TIMEOUT_MS};
use crate::seeds::Rng;
use crate::transforms::{apply_transform, ActionId, GaConfig, RewriteConfig, TransformContext, TransformError};

pub const FAILURE_PENALTY: f64 = -2.0;
pub const ZERO_PASS_PENALTY: f64 = -1.0;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("step called on a finished episode")]
    StepOnFinishedEpisode,
    #[error("step called before reset")]
    NotReset,
    #[error("episode aborted: {0}")]
    Aborted(String),
    #[error("episode trace is empty")]
    EmptyTrace,
    #[error("env config: {0}")]
    Config(String),
    #[error("trace file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    Shaped,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Step cap T during training.
    pub max_steps: usize,
    /// Step cap during evaluation.
    pub eval_max_steps: usize,
    pub reward_mode: RewardMode,
    pub timeout_ms: u64,
    pub decoding: DecodingParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 10,
            eval_max_steps: 10,
            reward_mode: RewardMode::Shaped,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            decoding: DecodingParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.max_steps == 0 || self.eval_max_steps == 0 {
            return Err(EnvError::Config("step caps must be at least 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(EnvError::Config("timeout_ms must be positive".into()));
        }
        self.decoding.validate().map_err(|e| EnvError::Config(e.to_string()))
    }
}

pub fn shaped_reward(verdict: &SandboxVerdict) -> f64 {
    if !verdict.is_executed() {
        return FAILURE_PENALTY;
    }
    let rho = verdict.pass_ratio;
    if rho <= 0.0 {
        ZERO_PASS_PENALTY
    } else if rho >= 1.0 {
        1.0
    } else {
        rho
    }
}

pub fn binary_reward(verdict: &SandboxVerdict) -> f64 {
    if verdict.all_passed() {
        1.0
    } else {
        0.0
    }
}

pub fn reward(mode: RewardMode, verdict: &SandboxVerdict) -> f64 {
    match mode {
        RewardMode::Shaped => shaped_reward(verdict),
        RewardMode::Binary => binary_reward(verdict),
    }
}

/// The backends and transform settings one episode runs against.
pub struct Pipeline {
    pub generator: Box<dyn TextBackend>,
    pub rewriter: Box<dyn TextBackend>,
    pub executor: Box<dyn Executor>,
    pub embedder: Box<dyn Embedder>,
    pub ga: GaConfig,
    pub rewrite: RewriteConfig,
    /// Sandbox fan-out for GA fitness evaluation.
    pub workers: usize,
}

/// Generate code for `prompt` with `seed` and run it against `task`.
pub fn generate_and_execute(
    pipeline: &Pipeline,
    task: &Task,
    prompt: &str,
    seed: u64,
    env: &EnvConfig,
) -> Result<(String, SandboxVerdict), TransformError> {
    let req = GenRequest::new(Role::CodeGenerator, prompt, env.decoding, seed);
    let raw = pipeline.generator.generate(&req)?;
    let code = extract_code(&raw.raw_text, task.entry_point.as_deref());
    let job = SandboxJob::new(code.clone(), task.tests.clone())
        .with_timeout(env.timeout_ms)
        .with_entry_point(task.entry_point.clone());
    let verdict = sandbox::run(&job, pipeline.executor.as_ref())?;
    Ok((code, verdict))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateVector,
    pub reward: f64,
    pub pass_ratio: f64,
    pub done: bool,
    pub verdict: SandboxVerdict,
    pub prompt_before: String,
    pub prompt_after: String,
    pub code: String,
    pub gen_seed: u64,
    pub ga_jobs: usize,
    pub rewrite_accepted: Option<bool>,
}

/// One refinement episode over one task. Not shareable across threads.
pub struct Environment<'a> {
    pipeline: &'a Pipeline,
    cfg: &'a EnvConfig,
    max_steps: usize,
    task: Option<Task>,
    keywords: BTreeSet<String>,
    prompt: String,
    step: usize,
    done: bool,
}

impl<'a> Environment<'a> {
    /// Uses the training step cap.
    pub fn new(pipeline: &'a Pipeline, cfg: &'a EnvConfig) -> Self {
        Self::with_step_cap(pipeline, cfg, cfg.max_steps)
    }

    pub fn with_step_cap(pipeline: &'a Pipeline, cfg: &'a EnvConfig, max_steps: usize) -> Self {
        Self {
            pipeline,
            cfg,
            max_steps: max_steps.max(1),
            task: None,
            keywords: BTreeSet::new(),
            prompt: String::new(),
            step: 0,
            done: false,
        }
    }

    pub fn reset(&mut self, task: &Task) -> Result<StateVector, EnvError> {
        self.keywords = extract_keywords(task);
        self.prompt = task.prompt.clone();
        self.task = Some(task.clone());
        self.step = 0;
        self.done = false;
        Ok(self.pipeline.embedder.embed(&self.prompt)?)
    }

    pub fn prompt(&self) -> &str {
        &self.prompt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Apply `action`, drawing all transform and decoding randomness from `rng`.
    ///
    /// An infrastructure error ends the episode with [`EnvError::Aborted`];
    /// program failures arrive as verdicts and are rewarded normally.
    pub fn step(&mut self, action: ActionId, rng: &mut Rng) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::StepOnFinishedEpisode);
        }
        let task = self.task.as_ref().ok_or(EnvError::NotReset)?;
        let abort = |done: &mut bool, e: TransformError| {
            *done = true;
            EnvError::Aborted(e.to_string())
        };

        let mut ctx = TransformContext {
            task,
            keywords: self.keywords.clone(),
            rng,
            generator: self.pipeline.generator.as_ref(),
            rewriter: self.pipeline.rewriter.as_ref(),
            executor: self.pipeline.executor.as_ref(),
            ga: &self.pipeline.ga,
            rewrite: &self.pipeline.rewrite,
            decoding: self.cfg.decoding,
            timeout_ms: self.cfg.timeout_ms,
            workers: self.pipeline.workers,
        };
        let transformed = match apply_transform(&self.prompt, action, &mut ctx) {
            Ok(t) => t,
            Err(e) => return Err(abort(&mut self.done, e)),
        };
        let gen_seed: u64 = rng.random();
        let (code, verdict) = match generate_and_execute(self.pipeline, task, &transformed.prompt, gen_seed, self.cfg) {
            Ok(r) => r,
            Err(e) => return Err(abort(&mut self.done, e)),
        };

        let prompt_before = std::mem::replace(&mut self.prompt, transformed.prompt.clone());
        self.step += 1;
        let reward = reward(self.cfg.reward_mode, &verdict);
        self.done = verdict.all_passed() || self.step >= self.max_steps;
        let next_state = match self.pipeline.embedder.embed(&self.prompt) {
            Ok(s) => s,
            Err(e) => {
                self.done = true;
                return Err(EnvError::Aborted(e.to_string()));
            }
        };
        Ok(StepOutcome {
            next_state,
            reward,
            pass_ratio: verdict.pass_ratio,
            done: self.done,
            verdict,
            prompt_before,
            prompt_after: transformed.prompt,
            code,
            gen_seed,
            ga_jobs: transformed.sandbox_jobs,
            rewrite_accepted: transformed.rewrite_accepted,
        })
    }
}

/// One step of an episode as written to trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub task_id: String,
    pub episode: u64,
    pub step: usize,
    /// Kept in memory for PPO; trace files omit it.
    #[serde(skip)]
    pub state: Vec<f64>,
    pub action: ActionId,
    pub log_prob: Option<f64>,
    pub value: Option<f64>,
    pub reward: f64,
    pub pass_ratio: f64,
    pub done: bool,
    pub status: Status,
    pub prompt_before: String,
    pub prompt_after: String,
    pub gen_seed: u64,
    pub ga_jobs: usize,
    pub rewrite_accepted: Option<bool>,
}

impl Transition {
    pub fn from_outcome(
        task_id: &str,
        episode: u64,
        state: &StateVector,
        action: ActionId,
        log_prob: Option<f64>,
        value: Option<f64>,
        step: usize,
        out: &StepOutcome,
    ) -> Self {
        Self {
            task_id: task_id.to_string(),
            episode,
            step,
            state: state.values.clone(),
            action,
            log_prob,
            value,
            reward: out.reward,
            pass_ratio: out.pass_ratio,
            done: out.done,
            status: out.verdict.status,
            prompt_before: out.prompt_before.clone(),
            prompt_after: out.prompt_after.clone(),
            gen_seed: out.gen_seed,
            ga_jobs: out.ga_jobs,
            rewrite_accepted: out.rewrite_accepted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub task_id: String,
    pub transitions: Vec<Transition>,
    /// Set when infrastructure failure cut the episode short.
    pub aborted: Option<String>,
}

impl EpisodeTrace {
    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn final_pass_ratio(&self) -> Option<f64> {
        self.transitions.last().map(|t| t.pass_ratio)
    }

    pub fn solved(&self) -> bool {
        self.transitions.iter().any(|t| t.status == Status::Executed && t.pass_ratio == 1.0)
    }
}

/// Undiscounted sum of per-step rewards.
pub fn episode_return(trace: &EpisodeTrace) -> Result<f64, EnvError> {
    if trace.transitions.is_empty() {
        return Err(EnvError::EmptyTrace);
    }
    Ok(trace.transitions.iter().map(|t| t.reward).sum())
}

/// Picks the next action; returns `(action, log_prob, value)`.
pub trait ActionSource {
    fn act(&mut self, state: &StateVector) -> Result<(ActionId, Option<f64>, Option<f64>), EnvError>;
}

impl<F> ActionSource for F
where
    F: FnMut(&StateVector) -> Result<(ActionId, Option<f64>, Option<f64>), EnvError>,
{
    fn act(&mut self, state: &StateVector) -> Result<(ActionId, Option<f64>, Option<f64>), EnvError> {
        self(state)
    }
}

/// Run one episode to completion. Aborts are recorded on the trace, not returned.
pub fn run_episode(
    env: &mut Environment<'_>,
    task: &Task,
    episode: u64,
    chooser: &mut dyn ActionSource,
    rng: &mut Rng,
) -> Result<EpisodeTrace, EnvError> {
    let mut state = env.reset(task)?;
    let mut trace = EpisodeTrace {
        task_id: task.id.clone(),
        ..Default::default()
    };
    while !env.is_done() {
        let (action, log_prob, value) = chooser.act(&state)?;
        let step = env.steps_taken();
        match env.step(action, rng) {
            Ok(out) => {
                trace
                    .transitions
                    .push(Transition::from_outcome(&task.id, episode, &state, action, log_prob, value, step, &out));
                state = out.next_state;
            }
            Err(EnvError::Aborted(msg)) => {
                trace.aborted = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(trace)
}

pub fn write_transitions<W: Write>(out: &mut W, transitions: &[Transition]) -> Result<(), EnvError> {
    for t in transitions {
        let line = serde_json::to_string(t).map_err(|e| EnvError::Io(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| EnvError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn read_transitions(path: &Path) -> Result<Vec<Transition>, EnvError> {
    let file = std::fs::File::open(path).map_err(|e| EnvError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EnvError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| EnvError::Io(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

/// Re-run a recorded step's generation and execution; returns the recomputed reward.
pub fn replay_transition(
    pipeline: &Pipeline,
    task: &Task,
    t: &Transition,
    env: &EnvConfig,
) -> Result<(f64, SandboxVerdict), TransformError> {
    let (_, verdict) = generate_and_execute(pipeline, task, &t.prompt_after, t.gen_seed, env)?;
    Ok((reward(env.reward_mode, &verdict), verdict))
}

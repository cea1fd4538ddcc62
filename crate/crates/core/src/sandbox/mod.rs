//! Running candidate programs against a task's assertions.
//!
//! An [`Executor`] turns a [`SandboxJob`] into a [`SandboxVerdict`]. The
//! child-process executor speaks a one-shot JSON protocol with an external
//! harness; the in-process fake answers from a rule table and never spawns
//! anything.
//!
//! Wire protocol, child side: read one object from stdin
//! `{"code": s, "tests": [s], "entry_point": s|null}`, write one object to
//! stdout `{"status": "ok"|"syntax_error"|"load_error", "results": [bool], "error": s}`,
//! exit 0. Anything else is a harness error.
//!
//! None of this is a security boundary.

mod child;
mod fake;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use child::ChildProcessExecutor;
pub use fake::{FakeOutcome, FakeRule, FakeTable, InProcessFake};

pub const DEFAULT_TIMEOUT_MS: u64 = 5_000;
/// Extra wall-clock allowance on top of the job timeout before the kill.
pub const KILL_GRACE_MS: u64 = 1_000;
/// Cap on captured candidate output kept in diagnostics.
pub const DIAGNOSTICS_LIMIT: usize = 4 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("cannot start sandbox process: {0}")]
    Spawn(String),
    #[error("pass ratio of an empty test list")]
    EmptyTests,
    #[error("sandbox config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxJob {
    pub code: String,
    pub tests: Vec<String>,
    pub timeout_ms: u64,
    pub entry_point: Option<String>,
}

impl SandboxJob {
    pub fn new(code: impl Into<String>, tests: Vec<String>) -> Self {
        Self {
            code: code.into(),
            tests,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            entry_point: None,
        }
    }

    pub fn with_timeout(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn with_entry_point(mut self, entry_point: Option<String>) -> Self {
        self.entry_point = entry_point;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    SyntaxError,
    RuntimeCrash,
    Timeout,
    HarnessError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "kind", rename_all = "snake_case")]
pub enum Status {
    Executed,
    ExecutionFailure(FailureKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxVerdict {
    pub status: Status,
    pub per_test: Option<Vec<bool>>,
    pub pass_ratio: f64,
    pub diagnostics: String,
}

impl SandboxVerdict {
    pub fn executed(per_test: Vec<bool>, diagnostics: impl Into<String>) -> Result<Self, SandboxError> {
        let pass_ratio = pass_ratio(&per_test)?;
        Ok(Self {
            status: Status::Executed,
            per_test: Some(per_test),
            pass_ratio,
            diagnostics: diagnostics.into(),
        })
    }

    pub fn failure(kind: FailureKind, diagnostics: impl Into<String>) -> Self {
        Self {
            status: Status::ExecutionFailure(kind),
            per_test: None,
            pass_ratio: 0.0,
            diagnostics: diagnostics.into(),
        }
    }

    pub fn is_executed(&self) -> bool {
        self.status == Status::Executed
    }

    pub fn all_passed(&self) -> bool {
        self.is_executed() && self.pass_ratio == 1.0
    }

    pub fn passed_count(&self) -> usize {
        self.per_test
            .as_ref()
            .map_or(0, |r| r.iter().filter(|b| **b).count())
    }
}

/// Fraction of passing tests, `count / len`.
pub fn pass_ratio(per_test: &[bool]) -> Result<f64, SandboxError> {
    if per_test.is_empty() {
        return Err(SandboxError::EmptyTests);
    }
    let passed = per_test.iter().filter(|b| **b).count();
    Ok(passed as f64 / per_test.len() as f64)
}

pub trait Executor: Send + Sync {
    fn run(&self, job: &SandboxJob) -> Result<SandboxVerdict, SandboxError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecutorConfig {
    ChildProcess {
        interpreter_path: PathBuf,
        harness_path: PathBuf,
    },
    InProcessFake {
        rules_path: PathBuf,
    },
}

impl ExecutorConfig {
    pub fn build(&self) -> Result<Box<dyn Executor>, SandboxError> {
        Ok(match self {
            ExecutorConfig::ChildProcess {
                interpreter_path,
                harness_path,
            } => Box::new(ChildProcessExecutor::new(interpreter_path, harness_path)?),
            ExecutorConfig::InProcessFake { rules_path } => Box::new(InProcessFake::load(rules_path)?),
        })
    }
}

/// Run `job` with `exec`.
pub fn run(job: &SandboxJob, exec: &dyn Executor) -> Result<SandboxVerdict, SandboxError> {
    if job.tests.is_empty() {
        return Err(SandboxError::EmptyTests);
    }
    exec.run(job)
}

/// Run several jobs on at most `workers` threads; results keep job order.
pub fn run_many(
    jobs: &[SandboxJob],
    exec: &dyn Executor,
    workers: usize,
) -> Vec<Result<SandboxVerdict, SandboxError>> {
    let workers = workers.clamp(1, jobs.len().max(1));
    if workers == 1 {
        return jobs.iter().map(|j| run(j, exec)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SandboxVerdict, SandboxError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let out = run(&jobs[i], exec);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job slot is filled"))
        .collect()
}

pub(crate) fn truncate_diagnostics(mut s: String) -> String {
    if s.len() > DIAGNOSTICS_LIMIT {
        let mut cut = DIAGNOSTICS_LIMIT;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
        s.push_str("…[truncated]");
    }
    s
}

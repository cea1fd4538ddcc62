//! Held-out evaluation, strict and soft Pass@1, and paired method comparison.

mod compare;
mod stats;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::embedding::StateVector;
use crate::env::{run_episode, EnvConfig, EnvError, Environment, EpisodeTrace, Pipeline};
use crate::policy::{PolicyKind, RefinementPolicy};
use crate::sandbox::Status;
use crate::seeds::substream;

pub use compare::{compare_reports, Comparison};
pub use stats::{
    binomial_two_sided, cohens_d, cohens_h, mcnemar, mcnemar_counts, paired_t, McNemar, McNemarMethod, PairedT,
    StatsError, MCNEMAR_EXACT_BELOW,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no evaluable tasks")]
    EmptyEvaluation,
    #[error("reports cover different tasks: {0}")]
    TaskSetMismatch(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub task_id: String,
    pub strict: bool,
    pub soft: f64,
    pub steps_used: usize,
    pub rho_trace: Vec<f64>,
    pub actions: Vec<crate::transforms::ActionId>,
}

impl EvalRecord {
    /// Score a pass-ratio trace: soft is `1 - prod(1 - rho)` over the steps taken,
    /// strict is whether some step passed everything.
    pub fn from_rhos(task_id: &str, rhos: &[f64], full_pass: &[bool]) -> Self {
        let mut remaining = 1.0;
        for r in rhos {
            remaining *= 1.0 - r;
        }
        Self {
            task_id: task_id.to_string(),
            strict: full_pass.iter().any(|b| *b),
            soft: 1.0 - remaining,
            steps_used: rhos.len(),
            rho_trace: rhos.to_vec(),
            actions: vec![],
        }
    }

    pub fn from_trace(trace: &EpisodeTrace) -> Self {
        let rhos: Vec<f64> = trace.transitions.iter().map(|t| t.pass_ratio).collect();
        let full: Vec<bool> = trace
            .transitions
            .iter()
            .map(|t| t.status == Status::Executed && t.pass_ratio == 1.0)
            .collect();
        let mut rec = Self::from_rhos(&trace.task_id, &rhos, &full);
        rec.actions = trace.transitions.iter().map(|t| t.action).collect();
        rec
    }
}

pub fn strict_pass_at_1(records: &[EvalRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(records.iter().filter(|r| r.strict).count() as f64 / records.len() as f64)
}

pub fn soft_pass_at_1(records: &[EvalRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(records.iter().map(|r| r.soft).sum::<f64>() / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedTask {
    pub task_id: String,
    pub diagnostic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: PolicyKind,
    pub dataset: String,
    pub n: usize,
    pub pass_at_1_strict: f64,
    pub soft_pass_at_1: f64,
    pub step_cap: usize,
    /// Excluded from `n`.
    pub aborted: Vec<AbortedTask>,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    pub fn from_records(
        policy: PolicyKind,
        dataset: &str,
        step_cap: usize,
        mut records: Vec<EvalRecord>,
        mut aborted: Vec<AbortedTask>,
    ) -> Result<Self, EvalError> {
        records.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        aborted.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        Ok(Self {
            policy,
            dataset: dataset.to_string(),
            n: records.len(),
            pass_at_1_strict: strict_pass_at_1(&records)?,
            soft_pass_at_1: soft_pass_at_1(&records)?,
            step_cap,
            aborted,
            records,
        })
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} on {}: Pass@1 {:.2}%  SoftPass@1 {:.2}%  (N = {})",
            self.policy,
            self.dataset,
            100.0 * self.pass_at_1_strict,
            100.0 * self.soft_pass_at_1,
            self.n
        );
        if !self.aborted.is_empty() {
            s.push_str(&format!("  warning: {} task(s) aborted", self.aborted.len()));
        }
        s
    }
}

/// Everything `evaluate_policy` needs besides the tasks.
pub struct EvalSetup<'a> {
    pub pipeline: &'a Pipeline,
    pub env: &'a EnvConfig,
    pub step_cap: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub dataset: String,
}

/// Run one episode per task under `policy` and aggregate.
///
/// Each task draws from its own seeded streams, so results do not depend on
/// scheduling or on which other tasks are evaluated.
pub fn evaluate_policy(
    policy: &RefinementPolicy,
    tasks: &[&Task],
    setup: &EvalSetup<'_>,
) -> Result<(EvalReport, Vec<EpisodeTrace>), EvalError> {
    let one = |task: &Task| -> Result<EpisodeTrace, EnvError> {
        let mut env = Environment::with_step_cap(setup.pipeline, setup.env, setup.step_cap);
        let key = crate::seeds::fnv1a(task.id.as_bytes());
        let mut env_rng = substream(setup.master_seed, "eval-env", key);
        let mut policy_rng = substream(setup.master_seed, "eval-policy", key);
        let mut chooser = |s: &StateVector| {
            let c = policy
                .choose_action(s, &mut policy_rng)
                .map_err(|e| EnvError::Config(e.to_string()))?;
            Ok((c.action, c.log_prob, c.value))
        };
        run_episode(&mut env, task, 0, &mut chooser, &mut env_rng)
    };

    let workers = setup.workers.clamp(1, tasks.len().max(1));
    let traces: Vec<Result<EpisodeTrace, EnvError>> = if workers == 1 {
        tasks.iter().map(|t| one(t)).collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let mut slots: Vec<Option<Result<EpisodeTrace, EnvError>>> = (0..tasks.len()).map(|_| None).collect();
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if i >= tasks.len() {
                        break;
                    }
                    let r = one(tasks[i]);
                    results.lock().expect("result slots")[i] = Some(r);
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every task evaluated")).collect()
    };

    let mut records = Vec::new();
    let mut aborted = Vec::new();
    let mut kept = Vec::new();
    for trace in traces {
        let trace = trace?;
        match &trace.aborted {
            Some(msg) => aborted.push(AbortedTask {
                task_id: trace.task_id.clone(),
                diagnostic: msg.clone(),
            }),
            None => records.push(EvalRecord::from_trace(&trace)),
        }
        kept.push(trace);
    }
    let report = EvalReport::from_records(policy.kind(), &setup.dataset, setup.step_cap, records, aborted)?;
    Ok((report, kept))
}

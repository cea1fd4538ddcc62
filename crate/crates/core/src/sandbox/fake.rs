use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Executor, FailureKind, SandboxError, SandboxJob, SandboxVerdict};

/// What the fake reports for a matching program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FakeOutcome {
    AllPass,
    NoPass,
    /// The first `n` tests pass, the rest fail.
    PassFirst { n: usize },
    /// A test passes iff its source contains one of `patterns`.
    PassTestsContaining { patterns: Vec<String> },
    SyntaxError,
    LoadError,
    Timeout,
    HarnessError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakeRule {
    pub code_contains: String,
    pub outcome: FakeOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakeTable {
    pub rules: Vec<FakeRule>,
    #[serde(default = "default_outcome")]
    pub default: FakeOutcome,
}

fn default_outcome() -> FakeOutcome {
    FakeOutcome::NoPass
}

/// Rule-table executor: first rule whose `code_contains` occurs in the
/// program decides the verdict. Pure in `(code, tests)`; spawns nothing.
#[derive(Debug, Clone)]
pub struct InProcessFake {
    table: FakeTable,
}

impl InProcessFake {
    pub fn new(rules: Vec<FakeRule>, default: FakeOutcome) -> Self {
        Self {
            table: FakeTable { rules, default },
        }
    }

    pub fn load(path: &Path) -> Result<Self, SandboxError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SandboxError::Config(format!("{}: {e}", path.display())))?;
        let table: FakeTable = serde_json::from_str(&text)
            .map_err(|e| SandboxError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self { table })
    }

    fn outcome_for(&self, code: &str) -> &FakeOutcome {
        self.table
            .rules
            .iter()
            .find(|r| code.contains(&r.code_contains))
            .map_or(&self.table.default, |r| &r.outcome)
    }
}

impl Executor for InProcessFake {
    fn run(&self, job: &SandboxJob) -> Result<SandboxVerdict, SandboxError> {
        let k = job.tests.len();
        let per_test = match self.outcome_for(&job.code) {
            FakeOutcome::AllPass => vec![true; k],
            FakeOutcome::NoPass => vec![false; k],
            FakeOutcome::PassFirst { n } => (0..k).map(|i| i < *n).collect(),
            FakeOutcome::PassTestsContaining { patterns } => job
                .tests
                .iter()
                .map(|t| patterns.iter().any(|p| t.contains(p.as_str())))
                .collect(),
            FakeOutcome::SyntaxError => {
                return Ok(SandboxVerdict::failure(FailureKind::SyntaxError, "fake: syntax error"))
            }
            FakeOutcome::LoadError => {
                return Ok(SandboxVerdict::failure(FailureKind::RuntimeCrash, "fake: load error"))
            }
            FakeOutcome::Timeout => return Ok(SandboxVerdict::failure(FailureKind::Timeout, "fake: timeout")),
            FakeOutcome::HarnessError => {
                return Ok(SandboxVerdict::failure(FailureKind::HarnessError, "fake: harness error"))
            }
        };
        SandboxVerdict::executed(per_test, "")
    }
}

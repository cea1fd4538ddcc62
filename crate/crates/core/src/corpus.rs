//! Benchmark task files and deterministic train/validation/test splits.
//!
//! Task files are JSON Lines, one task per line:
//!
//! ```text
//! {"id": "t1", "prompt": "...", "tests": ["assert f(1) == 1"], "entry_point": "f", "language_tag": "python"}
//! ```
//!
//! `entry_point`, `language_tag` and `split` are optional.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::seeds::Rng;

pub const DEFAULT_LANGUAGE: &str = "python";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {cause}")]
    Parse { line: usize, cause: String },
    #[error("task {id}: {violation}")]
    Validation { id: String, violation: String },
    #[error("split infeasible: {0}")]
    SplitInfeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// One programming problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub prompt: String,
    pub tests: Vec<String>,
    #[serde(default)]
    pub entry_point: Option<String>,
    #[serde(default)]
    pub split: Split,
    #[serde(default = "default_language")]
    pub language_tag: String,
}

fn default_language() -> String {
    DEFAULT_LANGUAGE.to_string()
}

impl Task {
    pub fn new(id: impl Into<String>, prompt: impl Into<String>, tests: Vec<String>) -> Self {
        Self {
            id: id.into(),
            prompt: prompt.into(),
            tests,
            entry_point: None,
            split: Split::Train,
            language_tag: default_language(),
        }
    }

    pub fn with_entry_point(mut self, name: impl Into<String>) -> Self {
        self.entry_point = Some(name.into());
        self
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |v: &str| {
            Err(CorpusError::Validation {
                id: self.id.clone(),
                violation: v.to_string(),
            })
        };
        if self.id.trim().is_empty() {
            return fail("id is empty");
        }
        if self.prompt.trim().is_empty() {
            return fail("prompt is empty");
        }
        if self.tests.is_empty() {
            return fail("tests is empty");
        }
        Ok(())
    }
}

/// How a corpus is cut into splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitMode {
    /// `train_n` Train, `test_n` Test, leftovers Validation.
    FixedCounts { train_n: usize, test_n: usize },
    /// `round(total * train_frac)` Train, the rest Test.
    Fractional { train_frac: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    /// Sentinel seed: keep the file's order instead of shuffling.
    pub const NO_SHUFFLE: u64 = u64::MAX;

    pub fn fixed(train_n: usize, test_n: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::FixedCounts { train_n, test_n },
            seed,
        }
    }

    pub fn fractional(train_frac: f64, seed: u64) -> Self {
        Self {
            mode: SplitMode::Fractional { train_frac },
            seed,
        }
    }

    /// Returns `(train, test, validation)` counts for a corpus of `total` tasks.
    fn counts(&self, total: usize) -> Result<(usize, usize, usize), CorpusError> {
        match self.mode {
            SplitMode::FixedCounts { train_n, test_n } => {
                if train_n + test_n > total {
                    return Err(CorpusError::SplitInfeasible(format!(
                        "{train_n} train + {test_n} test exceeds {total} tasks"
                    )));
                }
                Ok((train_n, test_n, total - train_n - test_n))
            }
            SplitMode::Fractional { train_frac } => {
                if !(train_frac > 0.0 && train_frac < 1.0) {
                    return Err(CorpusError::SplitInfeasible(format!(
                        "train fraction {train_frac} outside (0, 1)"
                    )));
                }
                let train = (total as f64 * train_frac).round() as usize;
                if train == 0 || train == total {
                    return Err(CorpusError::SplitInfeasible(format!(
                        "fraction {train_frac} of {total} tasks leaves an empty split"
                    )));
                }
                Ok((train, total - train, 0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub tasks: Vec<Task>,
    pub split_spec: Option<SplitSpec>,
}

/// Per-split task counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub total: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl Corpus {
    pub fn new(name: impl Into<String>, tasks: Vec<Task>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for task in &tasks {
            task.validate()?;
            if !seen.insert(task.id.as_str()) {
                return Err(CorpusError::Validation {
                    id: task.id.clone(),
                    violation: "duplicate id".into(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            tasks,
            split_spec: None,
        })
    }

    pub fn split(&self, which: Split) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(move |t| t.split == which)
    }

    pub fn counts(&self) -> SplitCounts {
        let mut c = SplitCounts {
            total: self.tasks.len(),
            ..Default::default()
        };
        for t in &self.tasks {
            match t.split {
                Split::Train => c.train += 1,
                Split::Validation => c.validation += 1,
                Split::Test => c.test += 1,
            }
        }
        c
    }

    pub fn get(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonLines,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    match format {
        CorpusFormat::JsonLines => parse_jsonl(&name, &text),
    }
}

pub fn parse_jsonl(name: &str, text: &str) -> Result<Corpus, CorpusError> {
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            cause: e.to_string(),
        })?;
        let id = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| CorpusError::Parse {
                line: i + 1,
                cause: "missing string field \"id\"".into(),
            })?;
        for field in ["prompt", "tests"] {
            if value.get(field).is_none() {
                return Err(CorpusError::Validation {
                    id,
                    violation: format!("missing field \"{field}\""),
                });
            }
        }
        let task: Task = serde_json::from_value(value).map_err(|e| CorpusError::Parse {
            line: i + 1,
            cause: e.to_string(),
        })?;
        tasks.push(task);
    }
    Corpus::new(name, tasks)
}

/// Reassign every task's split tag according to `spec`.
pub fn split_corpus(corpus: &Corpus, spec: SplitSpec) -> Result<Corpus, CorpusError> {
    let total = corpus.tasks.len();
    let (train_n, test_n, _) = spec.counts(total)?;
    let mut order: Vec<usize> = (0..total).collect();
    if spec.seed != SplitSpec::NO_SHUFFLE {
        let mut rng = Rng::seed_from_u64(spec.seed);
        order.shuffle(&mut rng);
    }
    let mut tasks = corpus.tasks.clone();
    for (rank, &idx) in order.iter().enumerate() {
        tasks[idx].split = if rank < train_n {
            Split::Train
        } else if rank < train_n + test_n {
            Split::Test
        } else {
            Split::Validation
        };
    }
    Ok(Corpus {
        name: corpus.name.clone(),
        tasks,
        split_spec: Some(spec),
    })
}

const NON_KEYWORD_CALLS: &[&str] = &[
    // keywords that can precede a parenthesis
    "assert", "and", "or", "not", "in", "is", "if", "else", "for", "while", "return", "lambda",
    "yield", "print", "del", "with", "from", "import", "None", "True", "False",
    // builtins
    "abs", "all", "any", "bool", "dict", "enumerate", "filter", "float", "frozenset", "int",
    "isinstance", "len", "list", "map", "max", "min", "range", "reversed", "round", "set",
    "sorted", "str", "sum", "tuple", "type", "zip", "repr", "chr", "ord", "pow", "divmod",
    "hash", "iter", "next", "complex", "bytes", "callable", "getattr", "hasattr", "setattr", "id",
    "format", "hex", "oct", "bin", "ascii", "bytearray", "object", "slice", "vars", "issubclass",
];

/// Names the rewrite filter must find in a rewritten prompt: the entry point
/// plus every free function called from the test assertions.
///
/// Lexical only: an identifier counts when the next non-space character is
/// `(`, it is not an attribute access, and it is not a keyword or builtin.
/// Quoted literals are skipped.
pub fn extract_keywords(task: &Task) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if let Some(ep) = task.entry_point.as_deref() {
        if !ep.trim().is_empty() {
            out.insert(ep.trim().to_string());
        }
    }
    for test in &task.tests {
        collect_call_targets(test, &mut out);
    }
    out
}

fn collect_call_targets(src: &str, out: &mut BTreeSet<String>) {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut prev_sig: Option<char> = None;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' || c == '\'' {
            // skip string literal with backslash escapes
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            prev_sig = Some(c);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let ident: String = chars[start..i].iter().collect();
            let mut j = i;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            let is_call = j < chars.len() && chars[j] == '(';
            let is_attr = prev_sig == Some('.');
            if is_call && !is_attr && !NON_KEYWORD_CALLS.contains(&ident.as_str()) {
                out.insert(ident);
            }
            prev_sig = chars.get(i - 1).copied();
            continue;
        }
        if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            prev_sig = Some('0');
            continue;
        }
        if !c.is_whitespace() {
            prev_sig = Some(c);
        }
        i += 1;
    }
}

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, LoadedConfig, RunError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// Stopped early; `resume_from` names the checkpoint to continue from.
    Halted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Index of one command's output directory. The only file carrying wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub config_path: PathBuf,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub started_at: String,
    pub finished_at: String,
    #[serde(default)]
    pub resumed_from: Option<PathBuf>,
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// Every other file in the directory.
    pub artifacts: Vec<Artifact>,
}

pub(crate) fn now() -> String {
    humantime::format_rfc3339_millis(SystemTime::now()).to_string()
}

impl RunManifest {
    pub(crate) fn begin(command: &str, cfg: &LoadedConfig) -> Result<Self, RunError> {
        Ok(Self {
            command: command.to_string(),
            status: RunStatus::Complete,
            config_path: cfg.path.clone(),
            config_hash: cfg.hash.clone(),
            config: serde_json::to_value(&cfg.raw).map_err(|e| RunError::Io(e.to_string()))?,
            started_at: now(),
            finished_at: String::new(),
            resumed_from: None,
            resume_from: None,
            notes: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    /// Index `dir` and write the manifest into it.
    pub(crate) fn finish(mut self, dir: &Path) -> Result<Self, RunError> {
        self.finished_at = now();
        self.artifacts = index_dir(dir)?;
        let text = serde_json::to_string_pretty(&self).map_err(|e| RunError::Io(e.to_string()))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(path, e))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Regular files in `dir` other than the manifest, sorted by name.
pub(crate) fn index_dir(dir: &Path) -> Result<Vec<Artifact>, RunError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !entry.file_type().map_err(|e| io_err(dir, e))?.is_file() {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| io_err(&entry.path(), e))?;
        out.push(Artifact {
            path: name,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Delete the files a previous run of this command may have left in `dir`.
pub(crate) fn clear_artifacts(dir: &Path, is_ours: impl Fn(&str) -> bool) -> Result<(), RunError> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let entry = entry.map_err(|e| io_err(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if (name == MANIFEST_FILE || is_ours(&name)) && entry.path().is_file() {
            std::fs::remove_file(entry.path()).map_err(|e| io_err(&entry.path(), e))?;
        }
    }
    Ok(())
}

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{GatewayError, GenRequest, GenResponse, Role, TextBackend};
use crate::seeds::{fnv1a, splitmix64};

/// One line of a mock script.
///
/// `match` is a substring test against the request prompt; the empty string
/// matches everything. A rule without `role` applies to both roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub pattern: String,
    #[serde(default)]
    pub role: Option<Role>,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub response_pool: Option<Vec<String>>,
}

impl MockRule {
    pub fn fixed(pattern: impl Into<String>, role: Option<Role>, response: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            role,
            response: Some(response.into()),
            response_pool: None,
        }
    }

    pub fn pool(pattern: impl Into<String>, role: Option<Role>, pool: Vec<String>) -> Self {
        Self {
            pattern: pattern.into(),
            role,
            response: None,
            response_pool: Some(pool),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match (&self.response, &self.response_pool) {
            (Some(_), None) => Ok(()),
            (None, Some(pool)) if !pool.is_empty() => Ok(()),
            (None, Some(_)) => Err("response_pool is empty".into()),
            _ => Err("exactly one of response / response_pool is required".into()),
        }
    }

    fn applies(&self, req: &GenRequest) -> bool {
        self.role.is_none_or(|r| r == req.role) && req.prompt.contains(&self.pattern)
    }
}

/// Deterministic first-match-wins responder.
///
/// For pool rules the pick is a mixed hash of `(seed, role, prompt)`, so the
/// output is a pure function of the request.
#[derive(Debug, Clone)]
pub struct ScriptedMock {
    id: String,
    rules: Vec<MockRule>,
}

impl ScriptedMock {
    pub fn new(id: impl Into<String>, rules: Vec<MockRule>) -> Result<Self, GatewayError> {
        let id = id.into();
        for (i, rule) in rules.iter().enumerate() {
            rule.validate().map_err(|cause| GatewayError::MockScript {
                path: id.clone(),
                cause: format!("rule {}: {cause}", i + 1),
            })?;
        }
        Ok(Self { id, rules })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::MockScript {
            path: shown.clone(),
            cause: e.to_string(),
        })?;
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: MockRule = serde_json::from_str(line).map_err(|e| GatewayError::MockScript {
                path: shown.clone(),
                cause: format!("line {}: {e}", i + 1),
            })?;
            rules.push(rule);
        }
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(format!("mock:{stem}"), rules)
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }

    fn respond(&self, req: &GenRequest) -> Result<String, GatewayError> {
        let rule = self
            .rules
            .iter()
            .find(|r| r.applies(req))
            .ok_or_else(|| GatewayError::MockRuleMissing {
                role: req.role,
                prompt: req.prompt.chars().take(80).collect(),
            })?;
        if let Some(text) = &rule.response {
            return Ok(text.clone());
        }
        let pool = rule.response_pool.as_deref().unwrap_or_default();
        let mut key = Vec::with_capacity(req.prompt.len() + 24);
        key.extend_from_slice(&req.seed.to_le_bytes());
        key.extend_from_slice(req.role.tag().as_bytes());
        key.push(0);
        key.extend_from_slice(req.prompt.as_bytes());
        // FNV low bits only see the low bits of each byte, so finalize before reducing
        let pick = (splitmix64(fnv1a(&key)) % pool.len() as u64) as usize;
        Ok(pool[pick].clone())
    }
}

impl TextBackend for ScriptedMock {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        req.validate()?;
        let start = Instant::now();
        let raw_text = self.respond(req)?;
        Ok(GenResponse {
            raw_text,
            backend_id: self.id.clone(),
            latency_ms: start.elapsed().as_millis() as u64,
        })
    }
}

//! Text-generation backends.
//!
//! The same client serves two roles: the frozen code generator and the
//! semantic rewriter. Two backends exist: an OpenAI-compatible HTTP endpoint
//! and a scripted mock used for hermetic runs.

mod extract;
mod http;
mod mock;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use extract::extract_code;
pub use http::HttpBackend;
pub use mock::{MockRule, ScriptedMock};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unavailable after {attempts} attempt(s): {cause}")]
    BackendUnavailable { attempts: u32, cause: String },
    #[error("backend timed out after {attempts} attempt(s)")]
    BackendTimeout { attempts: u32 },
    #[error("auth token variable {0} is not set")]
    AuthMissing(String),
    #[error("no mock rule matches {role:?} prompt {prompt:?}")]
    MockRuleMissing { role: Role, prompt: String },
    #[error("mock script {path}: {cause}")]
    MockScript { path: String, cause: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    CodeGenerator,
    Rewriter,
}

impl Role {
    pub(crate) fn tag(self) -> &'static str {
        match self {
            Role::CodeGenerator => "code_generator",
            Role::Rewriter => "rewriter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub top_p: f64,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: 0.8,
            max_new_tokens: 512,
            top_p: 0.95,
        }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} must be non-negative",
                self.temperature
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_new_tokens must be positive".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub role: Role,
    pub prompt: String,
    pub decoding: DecodingParams,
    pub seed: u64,
}

impl GenRequest {
    pub fn new(role: Role, prompt: impl Into<String>, decoding: DecodingParams, seed: u64) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            decoding,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("prompt is empty".into()));
        }
        self.decoding.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenResponse {
    pub raw_text: String,
    pub backend_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    HttpEndpoint {
        base_url: String,
        model_name: String,
        /// Name of the environment variable holding the bearer token.
        #[serde(default)]
        auth_env_var: Option<String>,
    },
    ScriptedMock {
        script_path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retry_limit() -> u32 {
    3
}

impl BackendConfig {
    pub fn mock(script_path: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::ScriptedMock {
                script_path: script_path.into(),
            },
            timeout_ms: default_timeout_ms(),
            retry_limit: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.timeout_ms == 0 {
            return Err(GatewayError::InvalidRequest("timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that turns a [`GenRequest`] into text.
pub trait TextBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError>;
}

/// A configured backend of either kind.
#[derive(Debug)]
pub enum Backend {
    Http(HttpBackend),
    Mock(ScriptedMock),
}

impl Backend {
    pub fn from_config(cfg: &BackendConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        Ok(match &cfg.kind {
            BackendKind::HttpEndpoint { .. } => Backend::Http(HttpBackend::new(cfg)?),
            BackendKind::ScriptedMock { script_path } => Backend::Mock(ScriptedMock::load(script_path)?),
        })
    }
}

impl TextBackend for Backend {
    fn backend_id(&self) -> &str {
        match self {
            Backend::Http(b) => b.backend_id(),
            Backend::Mock(b) => b.backend_id(),
        }
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        match self {
            Backend::Http(b) => b.generate(req),
            Backend::Mock(b) => b.generate(req),
        }
    }
}

/// One-shot convenience: build the backend described by `cfg` and run `req`.
pub fn generate(req: &GenRequest, cfg: &BackendConfig) -> Result<GenResponse, GatewayError> {
    Backend::from_config(cfg)?.generate(req)
}

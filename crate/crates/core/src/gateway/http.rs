use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendKind, GatewayError, GenRequest, GenResponse, TextBackend};

/// OpenAI-compatible `/chat/completions` client with retry on transient
/// failures (connection errors, timeouts, 429 and 5xx).
#[derive(Debug)]
pub struct HttpBackend {
    id: String,
    endpoint: String,
    model: String,
    auth_env_var: Option<String>,
    retry_limit: u32,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Failure {
    Transient(String),
    Timeout,
    Fatal(GatewayError),
}

const BASE_BACKOFF_MS: u64 = 100;
const MAX_BACKOFF_MS: u64 = 2_000;

impl HttpBackend {
    pub fn new(cfg: &BackendConfig) -> Result<Self, GatewayError> {
        let BackendKind::HttpEndpoint {
            base_url,
            model_name,
            auth_env_var,
        } = &cfg.kind
        else {
            return Err(GatewayError::InvalidRequest("not an HTTP backend config".into()));
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            id: format!("http:{model_name}"),
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            model: model_name.clone(),
            auth_env_var: auth_env_var.clone(),
            retry_limit: cfg.retry_limit,
            agent,
        })
    }

    fn token(&self) -> Result<Option<String>, GatewayError> {
        match &self.auth_env_var {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| GatewayError::AuthMissing(var.clone())),
        }
    }

    fn attempt(&self, body: &ChatRequest<'_>, token: Option<&str>) -> Result<String, Failure> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(t) = token {
            call = call.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = match call.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Err(Failure::Timeout),
            Err(e) => return Err(Failure::Transient(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if status == 401 || status == 403 {
            return Err(Failure::Fatal(GatewayError::BackendUnavailable {
                attempts: 1,
                cause: format!("HTTP {status}: authorization rejected"),
            }));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(GatewayError::BadResponse(format!("HTTP {status}"))));
        }
        let parsed: ChatResponse = match resp.body_mut().read_json() {
            Ok(p) => p,
            Err(ureq::Error::Timeout(_)) => return Err(Failure::Timeout),
            Err(e) => return Err(Failure::Fatal(GatewayError::BadResponse(e.to_string()))),
        };
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Failure::Fatal(GatewayError::BadResponse("no choices[0].message.content".into())))
    }
}

impl TextBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate(&self, req: &GenRequest) -> Result<GenResponse, GatewayError> {
        req.validate()?;
        let token = self.token()?;
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &req.prompt,
            }],
            temperature: req.decoding.temperature,
            top_p: req.decoding.top_p,
            max_tokens: req.decoding.max_new_tokens,
            seed: req.seed,
        };
        let start = Instant::now();
        let attempts = self.retry_limit + 1;
        let mut last = Failure::Transient("no attempt made".into());
        for n in 0..attempts {
            if n > 0 {
                let backoff = (BASE_BACKOFF_MS << (n - 1).min(5)).min(MAX_BACKOFF_MS);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            match self.attempt(&body, token.as_deref()) {
                Ok(raw_text) => {
                    return Ok(GenResponse {
                        raw_text,
                        backend_id: self.id.clone(),
                        latency_ms: start.elapsed().as_millis() as u64,
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(other) => last = other,
            }
        }
        Err(match last {
            Failure::Timeout => GatewayError::BackendTimeout { attempts },
            Failure::Transient(cause) => GatewayError::BackendUnavailable { attempts, cause },
            Failure::Fatal(e) => e,
        })
    }
}

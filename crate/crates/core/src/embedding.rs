//! Prompt → fixed-dimension, unit-norm state vector.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::seeds::fnv1a;

pub const DEFAULT_DIM: usize = 384;
const NGRAM: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("embedding has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedder config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Remote,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub values: Vec<f64>,
    pub source: Source,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &StateVector) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot / (self.norm() * other.norm())
    }

    /// L2-normalize `values`; a zero or non-finite vector becomes `e_0`.
    fn normalized(mut values: Vec<f64>, source: Source) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            for v in &mut values {
                *v /= norm;
            }
        } else {
            values.iter_mut().for_each(|v| *v = 0.0);
            values[0] = 1.0;
        }
        Self { values, source }
    }
}

/// Signed feature hashing of character trigrams, then L2 normalization.
///
/// Each trigram's FNV-1a hash picks bucket `h % dim` and sign `+1` when the
/// top bit is clear, `-1` otherwise. Inputs with no trigram (fewer than three
/// characters after trimming) map to the first basis vector.
pub fn fallback_embed(prompt: &str, dim: usize) -> StateVector {
    assert!(dim >= 8, "fallback embedding dimension must be at least 8");
    let chars: Vec<char> = prompt.trim().chars().collect();
    let mut values = vec![0.0; dim];
    let mut buf = String::new();
    for gram in chars.windows(NGRAM) {
        buf.clear();
        buf.extend(gram);
        let h = fnv1a(buf.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        values[bucket] += sign;
    }
    StateVector::normalized(values, Source::Fallback)
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, prompt: &str) -> Result<StateVector, EmbedError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Fallback {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        url: String,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
        /// Use the hashing embedder when the service cannot be reached.
        #[serde(default)]
        fallback_on_error: bool,
        #[serde(default)]
        cache: bool,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_timeout() -> u64 {
    10_000
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Fallback { dim: DEFAULT_DIM }
    }
}

impl EmbedderConfig {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderConfig::Fallback { dim } | EmbedderConfig::Remote { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        if self.dim() < 8 {
            return Err(EmbedError::Config(format!("dim {} must be at least 8", self.dim())));
        }
        Ok(match self {
            EmbedderConfig::Fallback { dim } => Box::new(HashingEmbedder { dim: *dim }),
            EmbedderConfig::Remote {
                url,
                dim,
                timeout_ms,
                fallback_on_error,
                cache,
            } => Box::new(RemoteEmbedder::new(url, *dim, *timeout_ms, *fallback_on_error, *cache)),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, prompt: &str) -> Result<StateVector, EmbedError> {
        Ok(fallback_embed(prompt, self.dim))
    }
}

/// Client for a service answering `POST {"input": s}` with `{"embedding": [...]}`.
pub struct RemoteEmbedder {
    url: String,
    dim: usize,
    fallback_on_error: bool,
    agent: ureq::Agent,
    cache: Option<Mutex<HashMap<String, StateVector>>>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(url: &str, dim: usize, timeout_ms: u64, fallback_on_error: bool, cache: bool) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms.max(1))))
            .build()
            .into();
        Self {
            url: url.to_string(),
            dim,
            fallback_on_error,
            agent,
            cache: cache.then(|| Mutex::new(HashMap::new())),
        }
    }

    fn fetch(&self, prompt: &str) -> Result<StateVector, EmbedError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { input: prompt })
            .map_err(|e| EmbedError::ServiceUnavailable(e.to_string()))?;
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::ServiceUnavailable(e.to_string()))?;
        if body.embedding.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: body.embedding.len(),
            });
        }
        if body.embedding.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::ServiceUnavailable("non-finite embedding".into()));
        }
        Ok(StateVector::normalized(body.embedding, Source::Remote))
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, prompt: &str) -> Result<StateVector, EmbedError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().unwrap().get(prompt) {
                return Ok(hit.clone());
            }
        }
        let out = match self.fetch(prompt) {
            Ok(v) => v,
            Err(EmbedError::ServiceUnavailable(_)) if self.fallback_on_error => fallback_embed(prompt, self.dim),
            Err(e) => return Err(e),
        };
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().insert(prompt.to_string(), out.clone());
        }
        Ok(out)
    }
}

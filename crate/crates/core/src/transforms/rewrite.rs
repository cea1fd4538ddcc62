//! Meta-prompted semantic rewriting with a structural filter.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{TransformContext, TransformError};
use crate::gateway::{DecodingParams, GenRequest, Role};

pub const DEFAULT_META_PROMPT: &str = "Rewrite the following programming task description to be explicit and unambiguous. Name the required function and its arguments. Do not add examples. Task: {prompt}";

const PLACEHOLDER: &str = "{prompt}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KeywordsMode {
    #[default]
    FromTask,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriteConfig {
    pub meta_prompt_template: String,
    pub required_keywords_mode: KeywordsMode,
    pub max_rewrite_chars: usize,
    pub decoding: DecodingParams,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        Self {
            meta_prompt_template: DEFAULT_META_PROMPT.to_string(),
            required_keywords_mode: KeywordsMode::FromTask,
            max_rewrite_chars: 2_000,
            decoding: DecodingParams::default(),
        }
    }
}

impl RewriteConfig {
    pub fn validate(&self) -> Result<(), TransformError> {
        let n = self.meta_prompt_template.matches(PLACEHOLDER).count();
        if n != 1 {
            return Err(TransformError::Config(format!(
                "meta-prompt template must contain {PLACEHOLDER} exactly once (found {n})"
            )));
        }
        if self.max_rewrite_chars == 0 {
            return Err(TransformError::Config("max_rewrite_chars must be positive".into()));
        }
        Ok(())
    }

    pub fn render(&self, prompt: &str) -> String {
        self.meta_prompt_template.replacen(PLACEHOLDER, prompt, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteOutcome {
    pub prompt: String,
    pub accepted: bool,
    /// Cleaned rewriter output, whether or not it was accepted.
    pub candidate: String,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// `keyword` occurs in `text` as a whole identifier.
fn contains_word(text: &str, keyword: &str) -> bool {
    if keyword.is_empty() {
        return true;
    }
    text.match_indices(keyword).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + keyword.len()..].chars().next();
        !before.is_some_and(is_ident_char) && !after.is_some_and(is_ident_char)
    })
}

/// Strip a code fence and surrounding whitespace/quotes from rewriter output.
fn clean(raw: &str) -> String {
    let body = match raw.find("```") {
        Some(open) => {
            let rest = &raw[open + 3..];
            let start = rest.find('\n').map_or(rest.len(), |n| n + 1);
            let rest = &rest[start..];
            match rest.find("```") {
                Some(close) => &rest[..close],
                None => rest,
            }
        }
        None => raw,
    };
    body.trim().trim_matches('"').trim().to_string()
}

pub fn semantic_rewrite(prompt: &str, ctx: &mut TransformContext<'_>) -> Result<RewriteOutcome, TransformError> {
    let cfg = ctx.rewrite;
    cfg.validate()?;
    let seed: u64 = ctx.rng.random();
    let req = GenRequest::new(Role::Rewriter, cfg.render(prompt), cfg.decoding, seed);
    let raw = ctx.rewriter.generate(&req)?;
    let candidate = clean(&raw.raw_text);

    let keywords_ok = match cfg.required_keywords_mode {
        KeywordsMode::FromTask => ctx.keywords.iter().all(|k| contains_word(&candidate, k)),
        KeywordsMode::None => true,
    };
    let accepted = !candidate.is_empty() && candidate.chars().count() <= cfg.max_rewrite_chars && keywords_ok;
    Ok(RewriteOutcome {
        prompt: if accepted { candidate.clone() } else { prompt.to_string() },
        accepted,
        candidate,
    })
}

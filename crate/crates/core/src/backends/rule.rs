//! Relativizer-presence baseline.

use std::sync::OnceLock;

use regex::Regex;

use super::{word_tokenize, Backend, Capabilities, Provenance, TokenizedSentence};
use crate::error::Result;

fn triple_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:who|which|that)\b").unwrap())
}

fn with_whom_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:who|whom|which|that)\b").unwrap())
}

/// Acceptable iff the text contains who, which or that as a whole word.
pub fn rule_classify(text: &str) -> bool {
    triple_regex().is_match(text)
}

/// The rule as a backend with a single pseudo-layer. By default `whom` also
/// counts as a relativizer, since generated datasets contain unmodified
/// `whom` sentences.
#[derive(Debug, Clone)]
pub struct RuleBackend {
    id: String,
    include_whom: bool,
}

impl RuleBackend {
    pub fn new(id: &str, include_whom: bool) -> Self {
        RuleBackend {
            id: id.to_string(),
            include_whom,
        }
    }
}

impl Backend for RuleBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            rule: true,
            ..Default::default()
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            backend_id: self.id.clone(),
            kind: "rule".into(),
            checkpoint: None,
            revision: Some(if self.include_whom {
                "who|whom|which|that".into()
            } else {
                "who|which|that".into()
            }),
            tokenizer: Some("word".into()),
        }
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence> {
        word_tokenize(text, false)
    }

    fn rule_classify(&self, text: &str) -> Result<bool> {
        Ok(if self.include_whom {
            with_whom_regex().is_match(text)
        } else {
            rule_classify(text)
        })
    }
}

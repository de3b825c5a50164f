//! Dependency-parsed sentences.
//!
//! Token indices are 0-based. Heads point at other tokens of the same
//! sentence; `None` marks the root. Character spans are UTF-8 byte offsets
//! into [`ParsedSentence::text`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    /// Index of the head token, `None` for the root.
    pub head: Option<usize>,
    pub dep_label: String,
    /// Half-open byte range of the token in the sentence text.
    pub char_span: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub text: String,
    pub tokens: Vec<Token>,
}

/// A token before it has been aligned with the sentence text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnalignedToken {
    pub surface: String,
    pub lemma: String,
    pub head: Option<usize>,
    pub dep_label: String,
}

impl ParsedSentence {
    /// Builds a sentence from tokens whose spans are already known, checking
    /// every structural invariant.
    pub fn new(text: String, tokens: Vec<Token>) -> Result<Self> {
        let sentence = ParsedSentence { text, tokens };
        sentence.validate()?;
        Ok(sentence)
    }

    /// Locates each token surface in `text`, left to right. Only whitespace
    /// may separate consecutive tokens.
    pub fn align(text: &str, tokens: Vec<UnalignedToken>) -> Result<Self> {
        let mut cursor = 0;
        let mut aligned = Vec::with_capacity(tokens.len());
        for (idx, tok) in tokens.into_iter().enumerate() {
            let rest = &text[cursor..];
            let skipped = rest.len() - rest.trim_start().len();
            let start = cursor + skipped;
            if !text[start..].starts_with(&tok.surface) {
                let found: String = text[start..].chars().take(tok.surface.chars().count() + 8).collect();
                return Err(Error::InvalidSentence(format!(
                    "token {} `{}` does not align with text at byte {} (found `{}`)",
                    idx + 1,
                    tok.surface,
                    start,
                    found
                )));
            }
            let end = start + tok.surface.len();
            aligned.push(Token {
                surface: tok.surface,
                lemma: tok.lemma,
                head: tok.head,
                dep_label: tok.dep_label,
                char_span: (start, end),
            });
            cursor = end;
        }
        ParsedSentence::new(text.to_string(), aligned)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidSentence("sentence has no tokens".into()));
        }
        self.validate_spans()?;
        self.validate_tree()
    }

    fn validate_spans(&self) -> Result<()> {
        let mut prev_end = 0;
        for (idx, tok) in self.tokens.iter().enumerate() {
            let (start, end) = tok.char_span;
            if start < prev_end || end < start || end > self.text.len() {
                return Err(Error::InvalidSentence(format!(
                    "token {idx} has span {start}..{end} overlapping or out of order"
                )));
            }
            let gap = self.text.get(prev_end..start).ok_or_else(|| {
                Error::InvalidSentence(format!("token {idx} span is not on a char boundary"))
            })?;
            if !gap.chars().all(char::is_whitespace) {
                return Err(Error::InvalidSentence(format!(
                    "non-whitespace text `{gap}` before token {idx}"
                )));
            }
            if self.text.get(start..end) != Some(tok.surface.as_str()) {
                return Err(Error::InvalidSentence(format!(
                    "token {idx} `{}` does not match its span",
                    tok.surface
                )));
            }
            prev_end = end;
        }
        if !self.text[prev_end..].chars().all(char::is_whitespace) {
            return Err(Error::InvalidSentence(
                "trailing text not covered by tokens".into(),
            ));
        }
        Ok(())
    }

    fn validate_tree(&self) -> Result<()> {
        let n = self.tokens.len();
        let roots = self.tokens.iter().filter(|t| t.head.is_none()).count();
        if roots != 1 {
            return Err(Error::MalformedTree(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        for (idx, tok) in self.tokens.iter().enumerate() {
            if let Some(head) = tok.head {
                if head >= n {
                    return Err(Error::MalformedTree(format!(
                        "token {idx} points at missing head {head}"
                    )));
                }
            }
        }
        self.check_acyclic()
    }

    /// Fails if following heads from any token revisits a token.
    pub fn check_acyclic(&self) -> Result<()> {
        let n = self.tokens.len();
        for start in 0..n {
            let mut current = start;
            let mut steps = 0;
            while let Some(head) = self.tokens[current].head {
                if head >= n {
                    return Err(Error::MalformedTree(format!(
                        "token {current} points at missing head {head}"
                    )));
                }
                current = head;
                steps += 1;
                if steps > n {
                    return Err(Error::MalformedTree(format!(
                        "cycle through token {start}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn children(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head == Some(idx))
            .map(|(i, _)| i)
    }

    /// All tokens dominated by `idx`, including `idx`, in ascending order.
    /// Assumes an acyclic tree.
    pub fn subtree(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![idx];
        let mut stack = vec![idx];
        while let Some(node) = stack.pop() {
            for child in self.children(node) {
                out.push(child);
                stack.push(child);
            }
        }
        out.sort_unstable();
        out
    }

    /// Whitespace-separated words of the text, used for word-level
    /// bookkeeping independent of the parser's tokenization.
    pub fn words(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }
}

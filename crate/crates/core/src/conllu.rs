//! Minimal CoNLL-U reader.
//!
//! Only the columns the extraction rules need are kept (ID, FORM, LEMMA,
//! HEAD, DEPREL, and `SpaceAfter=No` from MISC). Multiword-token ranges and
//! empty nodes are skipped.

use crate::error::{Error, Result};
use crate::sentence::{ParsedSentence, UnalignedToken};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConlluToken {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    /// 0 denotes the root.
    pub head: usize,
    pub deprel: String,
    pub space_after: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConlluSentence {
    /// 1-based line number of the first line of the block.
    pub line: usize,
    /// Value of a `# text = ...` comment, if present.
    pub text: Option<String>,
    pub tokens: Vec<ConlluToken>,
}

impl ConlluSentence {
    /// Text reconstructed from the tokens and their `SpaceAfter` flags.
    pub fn detokenized(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(&tok.form);
            if tok.space_after && i + 1 < self.tokens.len() {
                out.push(' ');
            }
        }
        out
    }

    /// Aligns this parse with `text` (the corpus sentence), falling back to
    /// the `# text` comment and then to the detokenized forms.
    pub fn to_parsed(&self, text: Option<&str>) -> Result<ParsedSentence> {
        let owned;
        let text = match (text, &self.text) {
            (Some(t), _) => t,
            (None, Some(t)) => t.as_str(),
            (None, None) => {
                owned = self.detokenized();
                owned.as_str()
            }
        };
        let tokens = self
            .tokens
            .iter()
            .map(|t| {
                let head = match t.head {
                    0 => None,
                    h if h > self.tokens.len() => {
                        return Err(Error::Parse {
                            line: self.line,
                            message: format!("token {} has head {h} beyond sentence end", t.id),
                        })
                    }
                    h => Some(h - 1),
                };
                Ok(UnalignedToken {
                    surface: t.form.clone(),
                    lemma: t.lemma.clone(),
                    head,
                    dep_label: t.deprel.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ParsedSentence::align(text, tokens).map_err(|e| Error::Parse {
            line: self.line,
            message: e.to_string(),
        })
    }
}

pub fn parse_str(input: &str) -> Result<Vec<ConlluSentence>> {
    let mut sentences = Vec::new();
    let mut current: Option<ConlluSentence> = None;

    for (lineno, raw) in input.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(s) = current.take() {
                finish(s, &mut sentences)?;
            }
            continue;
        }
        let sent = current.get_or_insert_with(|| ConlluSentence {
            line: line_no,
            text: None,
            tokens: Vec::new(),
        });
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(text) = comment.trim_start().strip_prefix("text") {
                if let Some(value) = text.trim_start().strip_prefix('=') {
                    sent.text = Some(value.trim().to_string());
                }
            }
            continue;
        }
        if let Some(tok) = parse_token_line(line, line_no)? {
            sent.tokens.push(tok);
        }
    }
    if let Some(s) = current.take() {
        finish(s, &mut sentences)?;
    }
    Ok(sentences)
}

fn finish(sentence: ConlluSentence, out: &mut Vec<ConlluSentence>) -> Result<()> {
    if sentence.tokens.is_empty() {
        // Comment-only block.
        return Ok(());
    }
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if tok.id != i + 1 {
            return Err(Error::Parse {
                line: sentence.line,
                message: format!("token ids are not consecutive at id {}", tok.id),
            });
        }
    }
    out.push(sentence);
    Ok(())
}

fn parse_token_line(line: &str, line_no: usize) -> Result<Option<ConlluToken>> {
    let cols: Vec<&str> = if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split_whitespace().collect()
    };
    if cols.len() != 10 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 10 columns, found {}", cols.len()),
        });
    }
    let id_col = cols[0];
    if id_col.contains('-') || id_col.contains('.') {
        return Ok(None);
    }
    let id = id_col.parse::<usize>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("invalid token id `{id_col}`"),
    })?;
    let head = cols[6].parse::<usize>().map_err(|_| Error::Parse {
        line: line_no,
        message: format!("invalid head `{}`", cols[6]),
    })?;
    let space_after = !cols[9].split('|').any(|f| f == "SpaceAfter=No");
    let lemma = if cols[2] == "_" && cols[1] != "_" {
        cols[1].to_string()
    } else {
        cols[2].to_string()
    };
    Ok(Some(ConlluToken {
        id,
        form: cols[1].to_string(),
        lemma,
        head,
        deprel: cols[7].to_string(),
        space_after,
    }))
}

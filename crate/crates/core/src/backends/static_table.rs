//! Non-contextual word vectors from a text-format table (GloVe, fastText).
//!
//! Lines are `word v1 v2 ... vd`. A leading `count dim` header line, as in
//! fastText `.vec` files, is skipped. Lookups try the exact form first and
//! then the lower-cased form; words missing from both are skipped and
//! counted.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;

use super::{word_tokenize, Backend, Capabilities, LayerEmbeddings, Provenance, TokenizedSentence};
use crate::error::{Error, Result};

#[derive(Debug)]
pub struct StaticTable {
    id: String,
    source: String,
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    lookups: AtomicUsize,
    misses: AtomicUsize,
}

impl StaticTable {
    pub fn load(id: &str, path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let mut table = Self::parse(id, &text)?;
        table.source = path.display().to_string();
        Ok(table)
    }

    pub fn parse(id: &str, text: &str) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values: Vec<&str> = parts.collect();
            if i == 0 && values.len() == 1 && word.parse::<usize>().is_ok() {
                continue;
            }
            let v = values
                .iter()
                .map(|s| s.parse::<f32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {d} values, found {}", v.len()),
                    })
                }
                _ => {}
            }
            vectors.entry(word.to_string()).or_insert(v);
        }
        let dim = dim.filter(|&d| d > 0).ok_or_else(|| Error::Parse {
            line: 1,
            message: "vector table is empty".into(),
        })?;
        Ok(StaticTable {
            id: id.to_string(),
            source: String::new(),
            dim,
            vectors,
            lookups: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn lookup(&self, word: &str) -> Option<&Vec<f32>> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
    }

    /// Fraction of looked-up words that were out of vocabulary.
    pub fn oov_rate(&self) -> f64 {
        let n = self.lookups.load(Ordering::Relaxed);
        if n == 0 {
            0.0
        } else {
            self.misses.load(Ordering::Relaxed) as f64 / n as f64
        }
    }
}

impl Backend for StaticTable {
    fn id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            embeddings: true,
            ..Default::default()
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            backend_id: self.id.clone(),
            kind: "static".into(),
            checkpoint: Some(self.source.clone()),
            revision: Some(format!("dim={} words={}", self.dim, self.vectors.len())),
            tokenizer: Some("word".into()),
        }
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence> {
        word_tokenize(text, false)
    }

    /// One layer holding the vectors of the in-vocabulary words. A sentence
    /// with no known word yields a single zero row.
    fn embed_layers(&self, text: &str) -> Result<LayerEmbeddings> {
        let all = self.tokenize(text)?;
        let mut kept = TokenizedSentence {
            text: all.text.clone(),
            pieces: Vec::new(),
            special_mask: Vec::new(),
            word_alignment: Vec::new(),
            mask_position: None,
        };
        let mut rows: Vec<f32> = Vec::new();
        for (i, piece) in all.pieces.iter().enumerate() {
            self.lookups.fetch_add(1, Ordering::Relaxed);
            match self.lookup(piece) {
                Some(v) => {
                    kept.pieces.push(piece.clone());
                    kept.special_mask.push(false);
                    kept.word_alignment.push(all.word_alignment[i]);
                    rows.extend_from_slice(v);
                }
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
        if kept.pieces.is_empty() {
            kept.pieces.push("<unk>".into());
            kept.special_mask.push(false);
            kept.word_alignment.push(None);
            rows = vec![0.0; self.dim];
        }
        let n = kept.pieces.len();
        let matrix = Array2::from_shape_vec((n, self.dim), rows)
            .map_err(|e| Error::backend(&self.id, e.to_string()))?;
        LayerEmbeddings::new(kept, vec![matrix])
    }

    fn diagnostics(&self) -> HashMap<String, f64> {
        HashMap::from([
            ("oov_rate".to_string(), self.oov_rate()),
            (
                "lookups".to_string(),
                self.lookups.load(Ordering::Relaxed) as f64,
            ),
        ])
    }
}

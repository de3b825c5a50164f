//! Offline backends for tests and CI.

use std::collections::HashMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    text_seed, word_tokenize, Backend, Capabilities, LayerEmbeddings, MaskedDistribution,
    Provenance, TokenizedSentence,
};
use crate::error::{Error, Result};

fn gaussian_layers(
    tokens: &TokenizedSentence,
    layers: usize,
    dim: usize,
    seed: u64,
) -> Vec<Array2<f32>> {
    (0..=layers)
        .map(|layer| {
            let s = text_seed(&[
                &seed.to_le_bytes(),
                &(layer as u64).to_le_bytes(),
                tokens.text.as_bytes(),
            ]);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            Array2::from_shape_fn((tokens.len(), dim), |_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x as f32
            })
        })
        .collect()
}

/// Label-independent standard-normal vectors, deterministic per text.
#[derive(Debug, Clone)]
pub struct GaussianMock {
    id: String,
    layers: usize,
    dim: usize,
    seed: u64,
}

impl GaussianMock {
    pub fn new(id: &str, layers: usize, dim: usize, seed: u64) -> Self {
        GaussianMock {
            id: id.to_string(),
            layers,
            dim,
            seed,
        }
    }
}

impl Backend for GaussianMock {
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
            kind: "mock:gaussian".into(),
            checkpoint: None,
            revision: Some(format!("layers={} dim={} seed={}", self.layers, self.dim, self.seed)),
            tokenizer: Some("word".into()),
        }
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence> {
        word_tokenize(text, true)
    }

    fn embed_layers(&self, text: &str) -> Result<LayerEmbeddings> {
        let tokens = self.tokenize(text)?;
        let layers = gaussian_layers(&tokens, self.layers, self.dim, self.seed);
        LayerEmbeddings::new(tokens, layers)
    }
}

/// Noise plus a shift of `±margin` along a fixed unit direction, signed by
/// the label the text carries in the supplied map. Unknown texts get no
/// shift.
#[derive(Debug, Clone)]
pub struct SeparableMock {
    id: String,
    layers: usize,
    dim: usize,
    seed: u64,
    margin: f64,
    direction: Vec<f32>,
    labels: HashMap<String, bool>,
}

impl SeparableMock {
    pub fn new(
        id: &str,
        layers: usize,
        dim: usize,
        seed: u64,
        margin: f64,
        labels: HashMap<String, bool>,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1ec);
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        SeparableMock {
            id: id.to_string(),
            layers,
            dim,
            seed,
            margin,
            direction: raw.iter().map(|x| (x / norm) as f32).collect(),
            labels,
        }
    }
}

impl Backend for SeparableMock {
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
            kind: "mock:separable".into(),
            checkpoint: None,
            revision: Some(format!(
                "layers={} dim={} seed={} margin={}",
                self.layers, self.dim, self.seed, self.margin
            )),
            tokenizer: Some("word".into()),
        }
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence> {
        word_tokenize(text, true)
    }

    fn embed_layers(&self, text: &str) -> Result<LayerEmbeddings> {
        let tokens = self.tokenize(text)?;
        let shift = match self.labels.get(text) {
            Some(true) => self.margin as f32,
            Some(false) => -(self.margin as f32),
            None => 0.0,
        };
        let mut layers = gaussian_layers(&tokens, self.layers, self.dim, self.seed);
        for layer in &mut layers {
            for mut row in layer.rows_mut() {
                for (x, d) in row.iter_mut().zip(&self.direction) {
                    *x += shift * d;
                }
            }
        }
        LayerEmbeddings::new(tokens, layers)
    }
}

/// Returns configured distributions verbatim.
#[derive(Debug, Clone)]
pub struct FixedDistributionMock {
    id: String,
    vocab: Vec<String>,
    default: Option<MaskedDistribution>,
    by_text: HashMap<String, MaskedDistribution>,
    pieces: HashMap<String, usize>,
}

impl FixedDistributionMock {
    pub fn new(
        id: &str,
        vocab: Vec<String>,
        probs: Vec<f64>,
        by_text: HashMap<String, Vec<f64>>,
        pieces: HashMap<String, usize>,
    ) -> Result<Self> {
        let default = if probs.is_empty() {
            None
        } else {
            Some(MaskedDistribution::from_probs(&vocab, &probs)?)
        };
        let by_text = by_text
            .into_iter()
            .map(|(t, p)| Ok((t, MaskedDistribution::from_probs(&vocab, &p)?)))
            .collect::<Result<_>>()?;
        Ok(FixedDistributionMock {
            id: id.to_string(),
            vocab,
            default,
            by_text,
            pieces,
        })
    }
}

impl Backend for FixedDistributionMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            mlm_head: true,
            ..Default::default()
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            backend_id: self.id.clone(),
            kind: "mock:fixed".into(),
            checkpoint: None,
            revision: Some(format!("vocab={}", self.vocab.len())),
            tokenizer: Some("word".into()),
        }
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence> {
        word_tokenize(text, true)
    }

    fn predict_masked(&self, tokens: &TokenizedSentence) -> Result<MaskedDistribution> {
        if tokens.mask_position.is_none() {
            return Err(Error::MaskCount(0));
        }
        self.by_text
            .get(&tokens.text)
            .or(self.default.as_ref())
            .cloned()
            .ok_or_else(|| {
                Error::backend(&self.id, format!("no distribution configured for `{}`", tokens.text))
            })
    }

    fn word_piece_count(&self, word: &str) -> Result<usize> {
        if let Some(&n) = self.pieces.get(word) {
            return Ok(n);
        }
        Ok(if self.vocab.iter().any(|v| v == word) { 1 } else { 2 })
    }
}

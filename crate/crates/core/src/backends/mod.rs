//! Sources of token representations and masked-token distributions.
//!
//! Every backend implements [`Backend`] and advertises what it can do via
//! [`Capabilities`]. Transformer checkpoints run out of process (see
//! [`subprocess`]); static vector tables, the relativizer rule and the mock
//! backends run in process.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use ndarray::Array2;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod mock;
pub mod rule;
pub mod static_table;
pub mod subprocess;

pub use mock::{FixedDistributionMock, GaussianMock, SeparableMock};
pub use rule::{rule_classify, RuleBackend};
pub use static_table::StaticTable;
pub use subprocess::SubprocessMlm;

/// Mask marker used in cloze texts. Backends translate it to their own
/// mask token.
pub const MASK: &str = "[MASK]";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub embeddings: bool,
    pub mlm_head: bool,
    pub rule: bool,
}

/// Identity of the model behind a result file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend_id: String,
    pub kind: String,
    pub checkpoint: Option<String>,
    pub revision: Option<String>,
    pub tokenizer: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub text: String,
    pub pieces: Vec<String>,
    /// True for sequence delimiters such as `[CLS]` and `[SEP]`.
    pub special_mask: Vec<bool>,
    /// Source word (whitespace-delimited) of each piece; `None` for specials.
    pub word_alignment: Vec<Option<usize>>,
    pub mask_position: Option<usize>,
}

impl TokenizedSentence {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pieces.len();
        if self.special_mask.len() != n || self.word_alignment.len() != n {
            return Err(Error::Tokenizer(format!(
                "piece metadata lengths differ: {} pieces, {} flags, {} alignments",
                n,
                self.special_mask.len(),
                self.word_alignment.len()
            )));
        }
        if let Some(m) = self.mask_position {
            if m >= n {
                return Err(Error::Tokenizer(format!("mask position {m} out of range")));
            }
        }
        Ok(())
    }
}

/// Hidden states of every layer, layer 0 being the embedding layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerEmbeddings {
    pub tokens: TokenizedSentence,
    /// Each matrix is pieces x dim.
    pub layers: Vec<Array2<f32>>,
}

impl LayerEmbeddings {
    pub fn new(tokens: TokenizedSentence, layers: Vec<Array2<f32>>) -> Result<Self> {
        tokens.validate()?;
        let Some(first) = layers.first() else {
            return Err(Error::InvalidArgument("no layers".into()));
        };
        let shape = first.dim();
        if shape.0 != tokens.len() {
            return Err(Error::DimensionMismatch {
                expected: tokens.len(),
                actual: shape.0,
            });
        }
        for l in &layers {
            if l.dim() != shape {
                return Err(Error::InvalidArgument(format!(
                    "layer shapes differ: {:?} vs {:?}",
                    l.dim(),
                    shape
                )));
            }
        }
        Ok(LayerEmbeddings { tokens, layers })
    }

    /// Index of the top layer (L for an L-layer model).
    pub fn max_layer(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.layers[0].ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Cls,
    Mean,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Cls => "cls",
            Pooling::Mean => "mean",
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cls" => Ok(Pooling::Cls),
            "mean" => Ok(Pooling::Mean),
            other => Err(Error::InvalidArgument(format!("unknown pooling `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub layer: usize,
    pub pooling: Pooling,
    pub values: Vec<f32>,
}

/// Sentence vector from one layer. `cls` takes the first piece; `mean`
/// averages the non-special pieces, or all pieces when `include_specials`.
pub fn pool(
    emb: &LayerEmbeddings,
    layer: usize,
    strategy: Pooling,
    include_specials: bool,
) -> Result<SentenceVector> {
    let matrix = emb.layers.get(layer).ok_or(Error::LayerOutOfRange {
        layer,
        max: emb.max_layer(),
    })?;
    let values: Vec<f32> = match strategy {
        Pooling::Cls => matrix.row(0).to_vec(),
        Pooling::Mean => {
            let rows: Vec<usize> = (0..matrix.nrows())
                .filter(|&i| include_specials || !emb.tokens.special_mask[i])
                .collect();
            if rows.is_empty() {
                return Err(Error::InvalidArgument(
                    "no non-special pieces to average".into(),
                ));
            }
            // Accumulate in f64 so the mean of identical rows is exact.
            let mut acc = vec![0f64; matrix.ncols()];
            for &i in &rows {
                for (a, &v) in acc.iter_mut().zip(matrix.row(i).iter()) {
                    *a += v as f64;
                }
            }
            let n = rows.len() as f64;
            acc.into_iter().map(|a| (a / n) as f32).collect()
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite value in layer {layer}"
        )));
    }
    Ok(SentenceVector {
        layer,
        pooling: strategy,
        values,
    })
}

/// Pools every layer at once.
pub fn pool_all(
    emb: &LayerEmbeddings,
    strategy: Pooling,
    include_specials: bool,
) -> Result<Vec<SentenceVector>> {
    (0..emb.layers.len())
        .map(|l| pool(emb, l, strategy, include_specials))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub index: usize,
    pub token: String,
    pub prob: f64,
}

/// Full-vocabulary distribution at a masked position, most probable first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskedDistribution {
    pub entries: Vec<VocabEntry>,
    pub vocab_size: usize,
}

impl MaskedDistribution {
    /// Builds a distribution from per-index probabilities. Sums within 1e-6
    /// of one are kept verbatim; sums within 1e-3 (single-precision
    /// transport) are renormalized; anything else is rejected.
    pub fn from_probs(vocab: &[String], probs: &[f64]) -> Result<Self> {
        if vocab.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                actual: probs.len(),
            });
        }
        if vocab.is_empty() {
            return Err(Error::EmptyInput("vocabulary".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        let scale = if (sum - 1.0).abs() <= 1e-6 {
            1.0
        } else if (sum - 1.0).abs() <= 1e-3 {
            1.0 / sum
        } else {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {sum}, not 1"
            )));
        };
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let entries = order
            .into_iter()
            .map(|i| VocabEntry {
                index: i,
                token: vocab[i].clone(),
                prob: probs[i] * scale,
            })
            .collect();
        Ok(MaskedDistribution {
            entries,
            vocab_size: vocab.len(),
        })
    }

    pub fn top(&self) -> Option<&VocabEntry> {
        self.entries.first()
    }
}

/// Uniform surface over every representation source.
///
/// Backends that are not safe for concurrent calls return `false` from
/// [`Backend::concurrent`]; callers then serialize their requests.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    fn provenance(&self) -> Provenance;

    fn concurrent(&self) -> bool {
        true
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence>;

    fn embed_layers(&self, _text: &str) -> Result<LayerEmbeddings> {
        Err(self.unsupported("embeddings"))
    }

    fn predict_masked(&self, _tokens: &TokenizedSentence) -> Result<MaskedDistribution> {
        Err(self.unsupported("masked prediction"))
    }

    fn rule_classify(&self, _text: &str) -> Result<bool> {
        Err(self.unsupported("rule classification"))
    }

    /// Number of pieces `word` becomes when it follows a space mid-sentence.
    fn word_piece_count(&self, word: &str) -> Result<usize> {
        let toks = self.tokenize(word)?;
        Ok(toks.special_mask.iter().filter(|s| !**s).count())
    }

    /// Extra counters a backend wants recorded in reports (e.g. OOV rate).
    fn diagnostics(&self) -> HashMap<String, f64> {
        HashMap::new()
    }

    fn unsupported(&self, capability: &str) -> Error {
        Error::Unsupported {
            backend: self.id().to_string(),
            capability: capability.to_string(),
        }
    }
}

fn word_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\[MASK\]|[\p{L}\p{N}]+(?:['’][\p{L}\p{N}]+)*|[^\s\p{L}\p{N}]").unwrap()
    })
}

/// Word-level tokenization shared by the in-process backends: words,
/// contractions and single punctuation marks. `[MASK]` stays one piece.
pub fn word_tokenize(text: &str, with_specials: bool) -> Result<TokenizedSentence> {
    if text.trim().is_empty() {
        return Err(Error::Tokenizer("empty text".into()));
    }
    let word_starts: Vec<(usize, usize)> = {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    spans.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push((s, text.len()));
        }
        spans
    };
    let mut tok = TokenizedSentence {
        text: text.to_string(),
        pieces: Vec::new(),
        special_mask: Vec::new(),
        word_alignment: Vec::new(),
        mask_position: None,
    };
    if with_specials {
        tok.pieces.push("[CLS]".into());
        tok.special_mask.push(true);
        tok.word_alignment.push(None);
    }
    let mut masks = 0;
    let mut word = 0;
    for m in word_regex().find_iter(text) {
        while word + 1 < word_starts.len() && m.start() >= word_starts[word].1 {
            word += 1;
        }
        if m.as_str() == MASK {
            masks += 1;
            tok.mask_position = Some(tok.pieces.len());
        }
        tok.pieces.push(m.as_str().to_string());
        tok.special_mask.push(false);
        tok.word_alignment.push(Some(word));
    }
    if masks > 1 {
        return Err(Error::MaskCount(masks));
    }
    if with_specials {
        tok.pieces.push("[SEP]".into());
        tok.special_mask.push(true);
        tok.word_alignment.push(None);
    }
    Ok(tok)
}

/// Deterministic 64-bit seed from arbitrary text.
pub(crate) fn text_seed(parts: &[&[u8]]) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mlm,
    Static,
    Rule,
    Mock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockKind {
    Separable,
    Gaussian,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    pub variant: MockKind,
    #[serde(default = "default_mock_layers")]
    pub layers: usize,
    #[serde(default = "default_mock_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Separation along the label direction, in noise standard deviations.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Vocabulary of the fixed-distribution mock.
    #[serde(default)]
    pub vocab: Vec<String>,
    /// Distribution returned for any input not listed in `by_text`.
    #[serde(default)]
    pub probs: Vec<f64>,
    #[serde(default)]
    pub by_text: HashMap<String, Vec<f64>>,
    /// Piece counts for words outside `vocab` (default 2).
    #[serde(default)]
    pub pieces: HashMap<String, usize>,
}

fn default_mock_layers() -> usize {
    4
}
fn default_mock_dim() -> usize {
    16
}
fn default_margin() -> f64 {
    4.0
}

/// One backend entry of a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub name: String,
    pub kind: BackendKind,
    /// Model identifier for `mlm` backends.
    #[serde(default)]
    pub checkpoint: Option<String>,
    #[serde(default)]
    pub revision: Option<String>,
    /// Vector file for `static` backends.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_pooling")]
    pub pooling: Vec<Pooling>,
    #[serde(default)]
    pub include_specials: bool,
    #[serde(default)]
    pub device: Option<String>,
    /// Adapter command for `mlm` backends.
    #[serde(default)]
    pub command: Option<Vec<String>>,
    #[serde(default)]
    pub mock: Option<MockConfig>,
    /// Rule backend: restrict to who/which/that, leaving whom out.
    #[serde(default)]
    pub rule_exclude_whom: bool,
}

fn default_pooling() -> Vec<Pooling> {
    vec![Pooling::Mean]
}

impl BackendConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| Error::Parse {
                line: e.span().map(|s| line_of(&text, s.start)).unwrap_or(0),
                message: format!("{}: {}", path.display(), e.message()),
            })
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }
}

pub(crate) fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

/// Extra inputs some backends need at construction time.
#[derive(Clone, Debug, Default)]
pub struct BuildContext {
    /// Text -> label map for the separable mock.
    pub labels: HashMap<String, bool>,
    /// Cache directory handed to out-of-process adapters.
    pub cache_dir: Option<PathBuf>,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: Option<PathBuf>,
}

pub fn build_backend(config: &BackendConfig, ctx: &BuildContext) -> Result<Box<dyn Backend>> {
    let resolve = |p: &Path| -> PathBuf {
        match &ctx.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    };
    match config.kind {
        BackendKind::Rule => Ok(Box::new(RuleBackend::new(
            &config.name,
            !config.rule_exclude_whom,
        ))),
        BackendKind::Static => {
            let path = config.path.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("static backend `{}` needs `path`", config.name))
            })?;
            Ok(Box::new(StaticTable::load(&config.name, &resolve(path))?))
        }
        BackendKind::Mock => {
            let mock = config.mock.as_ref().ok_or_else(|| {
                Error::InvalidArgument(format!("mock backend `{}` needs `mock`", config.name))
            })?;
            Ok(match mock.variant {
                MockKind::Separable => Box::new(SeparableMock::new(
                    &config.name,
                    mock.layers,
                    mock.dim,
                    mock.seed,
                    mock.margin,
                    ctx.labels.clone(),
                )),
                MockKind::Gaussian => Box::new(GaussianMock::new(
                    &config.name,
                    mock.layers,
                    mock.dim,
                    mock.seed,
                )),
                MockKind::Fixed => Box::new(FixedDistributionMock::new(
                    &config.name,
                    mock.vocab.clone(),
                    mock.probs.clone(),
                    mock.by_text.clone(),
                    mock.pieces.clone(),
                )?),
            })
        }
        BackendKind::Mlm => {
            let checkpoint = config.checkpoint.clone().ok_or_else(|| {
                Error::InvalidArgument(format!("mlm backend `{}` needs `checkpoint`", config.name))
            })?;
            let command = config
                .command
                .clone()
                .unwrap_or_else(subprocess::default_command);
            Ok(Box::new(SubprocessMlm::spawn(
                &config.name,
                &command,
                &checkpoint,
                config.revision.as_deref(),
                config.device.as_deref(),
                ctx.cache_dir.as_deref(),
            )?))
        }
    }
}

//! Masked language models served by an external adapter process.
//!
//! The adapter reads one JSON request per line on stdin and answers with one
//! JSON object per line on stdout. Float arrays travel as base64-encoded
//! little-endian `f32`. Requests:
//!
//! | op            | request fields                                    | response fields                                                        |
//! |---------------|---------------------------------------------------|------------------------------------------------------------------------|
//! | `init`        | `checkpoint`, `revision`, `device`, `cache_dir`   | `num_layers`, `hidden_size`, `tokenizer`, `vocab` (surface strings)    |
//! | `tokenize`    | `text`                                            | `pieces`, `special_mask`, `word_ids`, `mask_position`                  |
//! | `embed`       | `text`                                            | tokenize fields plus `layers` (one base64 matrix per layer, row-major) |
//! | `predict`     | `text` (with `[MASK]`)                            | `probs` (base64, vocabulary order)                                     |
//! | `word_pieces` | `word`                                            | `count`                                                                |
//! | `shutdown`    |                                                   |                                                                        |
//!
//! Every response carries `"ok": true` or `"ok": false` with an `error`
//! string. `scripts/hf_mlm_adapter.py` implements the protocol on top of
//! the `transformers` library.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::Array2;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    Backend, Capabilities, LayerEmbeddings, MaskedDistribution, Provenance, TokenizedSentence,
};
use crate::error::{Error, Result};

/// Command used when the backend config does not name one.
pub fn default_command() -> Vec<String> {
    let script = std::env::var("RCPROBE_ADAPTER")
        .unwrap_or_else(|_| "scripts/hf_mlm_adapter.py".to_string());
    vec!["python3".to_string(), script]
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct SubprocessMlm {
    id: String,
    checkpoint: String,
    revision: Option<String>,
    tokenizer: String,
    num_layers: usize,
    hidden_size: usize,
    vocab: Vec<String>,
    channel: Mutex<Channel>,
}

#[derive(Deserialize)]
struct InitReply {
    num_layers: usize,
    hidden_size: usize,
    #[serde(default)]
    tokenizer: Option<String>,
    vocab: Vec<String>,
}

#[derive(Deserialize)]
struct TokenizeReply {
    pieces: Vec<String>,
    special_mask: Vec<bool>,
    word_ids: Vec<Option<usize>>,
    #[serde(default)]
    mask_position: Option<usize>,
}

impl TokenizeReply {
    fn into_tokens(self, text: &str) -> Result<TokenizedSentence> {
        let t = TokenizedSentence {
            text: text.to_string(),
            pieces: self.pieces,
            special_mask: self.special_mask,
            word_alignment: self.word_ids,
            mask_position: self.mask_position,
        };
        t.validate()?;
        Ok(t)
    }
}

fn decode_f32(id: &str, b64: &str) -> Result<Vec<f32>> {
    let bytes = B64
        .decode(b64)
        .map_err(|e| Error::backend(id, format!("bad base64 payload: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::backend(id, "payload length is not a multiple of 4"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

impl SubprocessMlm {
    pub fn spawn(
        id: &str,
        command: &[String],
        checkpoint: &str,
        revision: Option<&str>,
        device: Option<&str>,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::backend(id, format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let channel = Mutex::new(Channel {
            child,
            stdin,
            stdout,
        });
        let mut backend = SubprocessMlm {
            id: id.to_string(),
            checkpoint: checkpoint.to_string(),
            revision: revision.map(str::to_string),
            tokenizer: String::new(),
            num_layers: 0,
            hidden_size: 0,
            vocab: Vec::new(),
            channel,
        };
        let reply: InitReply = backend.request(json!({
            "op": "init",
            "checkpoint": checkpoint,
            "revision": revision,
            "device": device,
            "cache_dir": cache_dir.map(|p| p.display().to_string()),
        }))?;
        backend.num_layers = reply.num_layers;
        backend.hidden_size = reply.hidden_size;
        backend.tokenizer = reply.tokenizer.unwrap_or_else(|| checkpoint.to_string());
        backend.vocab = reply.vocab;
        if backend.vocab.is_empty() {
            return Err(Error::backend(id, "adapter reported an empty vocabulary"));
        }
        Ok(backend)
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn request<T: for<'de> Deserialize<'de>>(&self, body: Value) -> Result<T> {
        let mut ch = self
            .channel
            .lock()
            .map_err(|_| Error::backend(&self.id, "adapter channel poisoned"))?;
        let mut line = serde_json::to_string(&body)?;
        line.push('\n');
        ch.stdin
            .write_all(line.as_bytes())
            .and_then(|_| ch.stdin.flush())
            .map_err(|e| Error::backend(&self.id, format!("write to adapter failed: {e}")))?;
        let mut reply = String::new();
        let n = ch
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::backend(&self.id, format!("read from adapter failed: {e}")))?;
        if n == 0 {
            return Err(Error::backend(&self.id, "adapter exited unexpectedly"));
        }
        let value: Value = serde_json::from_str(&reply)
            .map_err(|e| Error::backend(&self.id, format!("malformed adapter reply: {e}")))?;
        if value.get("ok") != Some(&Value::Bool(true)) {
            let msg = value
                .get("error")
                .and_then(Value::as_str)
                .unwrap_or("unknown adapter error");
            return Err(Error::backend(&self.id, msg));
        }
        serde_json::from_value(value)
            .map_err(|e| Error::backend(&self.id, format!("unexpected adapter reply: {e}")))
    }
}

impl Drop for SubprocessMlm {
    fn drop(&mut self) {
        if let Ok(mut ch) = self.channel.lock() {
            let _ = ch.stdin.write_all(b"{\"op\":\"shutdown\"}\n");
            let _ = ch.stdin.flush();
            let _ = ch.child.wait();
        }
    }
}

impl Backend for SubprocessMlm {
    fn id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            embeddings: true,
            mlm_head: true,
            rule: false,
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            backend_id: self.id.clone(),
            kind: "mlm".into(),
            checkpoint: Some(self.checkpoint.clone()),
            revision: self.revision.clone(),
            tokenizer: Some(self.tokenizer.clone()),
        }
    }

    fn concurrent(&self) -> bool {
        false
    }

    fn tokenize(&self, text: &str) -> Result<TokenizedSentence> {
        if text.trim().is_empty() {
            return Err(Error::Tokenizer("empty text".into()));
        }
        let reply: TokenizeReply = self.request(json!({"op": "tokenize", "text": text}))?;
        reply.into_tokens(text)
    }

    fn embed_layers(&self, text: &str) -> Result<LayerEmbeddings> {
        #[derive(Deserialize)]
        struct EmbedReply {
            #[serde(flatten)]
            tokens: TokenizeReply,
            layers: Vec<String>,
        }
        if text.trim().is_empty() {
            return Err(Error::Tokenizer("empty text".into()));
        }
        let reply: EmbedReply = self.request(json!({"op": "embed", "text": text}))?;
        let tokens = reply.tokens.into_tokens(text)?;
        if reply.layers.len() != self.num_layers + 1 {
            return Err(Error::backend(
                &self.id,
                format!(
                    "expected {} layers, adapter sent {}",
                    self.num_layers + 1,
                    reply.layers.len()
                ),
            ));
        }
        let n = tokens.len();
        let layers = reply
            .layers
            .iter()
            .map(|b| {
                let flat = decode_f32(&self.id, b)?;
                Array2::from_shape_vec((n, self.hidden_size), flat)
                    .map_err(|e| Error::backend(&self.id, format!("layer shape: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        LayerEmbeddings::new(tokens, layers)
    }

    fn predict_masked(&self, tokens: &TokenizedSentence) -> Result<MaskedDistribution> {
        if tokens.mask_position.is_none() {
            return Err(Error::MaskCount(0));
        }
        #[derive(Deserialize)]
        struct PredictReply {
            probs: String,
        }
        let reply: PredictReply =
            self.request(json!({"op": "predict", "text": tokens.text}))?;
        let probs: Vec<f64> = decode_f32(&self.id, &reply.probs)?
            .into_iter()
            .map(f64::from)
            .collect();
        MaskedDistribution::from_probs(&self.vocab, &probs)
    }

    fn word_piece_count(&self, word: &str) -> Result<usize> {
        #[derive(Deserialize)]
        struct CountReply {
            count: usize,
        }
        let reply: CountReply = self.request(json!({"op": "word_pieces", "word": word}))?;
        Ok(reply.count)
    }
}

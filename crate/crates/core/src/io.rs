//! Corpus readers and JSONL helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One corpus sentence with the 1-based line it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSentence {
    pub line: usize,
    pub text: String,
}

#[derive(Deserialize)]
struct JsonText {
    text: String,
}

/// Reads a corpus given either as plain text (one sentence per line) or as
/// JSONL objects with a `text` field. Blank lines are skipped.
pub fn parse_corpus(input: &str) -> Result<Vec<RawSentence>> {
    let is_jsonl = input
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with('{'));
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let text = if is_jsonl {
            serde_json::from_str::<JsonText>(trimmed)
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?
                .text
        } else {
            trimmed.to_string()
        };
        out.push(RawSentence { line: i + 1, text });
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<RawSentence>> {
    parse_corpus(&read_to_string(path)?)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl<T: DeserializeOwned>(input: &str) -> Result<Vec<T>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    from_jsonl(&read_to_string(path)?)
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    write_string(path, &to_jsonl(items)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_string(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_text_corpus() {
        let c = parse_corpus("First one.\n\n  Second one.  \n").unwrap();
        assert_eq!(
            c,
            vec![
                RawSentence { line: 1, text: "First one.".into() },
                RawSentence { line: 3, text: "Second one.".into() },
            ]
        );
    }

    #[test]
    fn jsonl_corpus() {
        let c = parse_corpus("{\"text\": \"A b.\"}\n{\"text\": \"C d.\", \"id\": 3}\n").unwrap();
        assert_eq!(c[1].text, "C d.");
        assert_eq!(c[1].line, 2);
    }

    #[test]
    fn jsonl_error_has_line() {
        let err = parse_corpus("{\"text\": \"A\"}\n{\"txt\": 1}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

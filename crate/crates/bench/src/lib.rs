//! Inputs shared by the benchmarks.

use rcprobe_core::conllu::{parse_str, ConlluSentence};
use rcprobe_core::extraction::{extract, ExtractionConfig};
use rcprobe_core::io::{parse_corpus, RawSentence};
use rcprobe_core::{synthetic, RcRecord};

pub struct Corpus {
    pub raw: Vec<RawSentence>,
    pub parses: Vec<ConlluSentence>,
}

pub fn corpus(n: usize, seed: u64) -> Corpus {
    let syn = synthetic::generate(n, seed);
    Corpus {
        raw: parse_corpus(&syn.corpus_text()).expect("synthetic corpus parses"),
        parses: parse_str(&syn.conllu).expect("synthetic parses parse"),
    }
}

pub fn records(n: usize, seed: u64) -> Vec<RcRecord> {
    let c = corpus(n, seed);
    extract(Some(&c.raw), &c.parses, &ExtractionConfig::default())
        .expect("synthetic sentences extract")
        .records
}

/// `n` rows of dimension `dim`, label-shifted along the first axis.
pub fn design(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f32>>, Vec<bool>) {
    let mut state = seed | 1;
    let mut next = || {
        // xorshift; plenty for benchmark inputs
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let labels: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let rows = labels
        .iter()
        .map(|&l| {
            (0..dim)
                .map(|j| (next() + if j == 0 && l { 0.3 } else { 0.0 }) as f32)
                .collect()
        })
        .collect();
    (rows, labels)
}

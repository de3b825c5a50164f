//! Writes a synthetic corpus and its CoNLL-U parses.
//!
//! cargo run -p rcprobe-core --example synth -- OUT_DIR [N] [SEED]

use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().expect("usage: synth OUT_DIR [N] [SEED]"));
    let n: usize = args.next().map_or(1000, |s| s.parse().expect("N"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("SEED"));
    let syn = rcprobe_core::synthetic::generate(n, seed);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("corpus.txt"), syn.corpus_text()).unwrap();
    std::fs::write(dir.join("parses.conllu"), &syn.conllu).unwrap();
    eprintln!("{n} sentences in {}", dir.display());
}

use std::path::{Path, PathBuf};
use std::process::Command;

use rcprobe_core::synthetic;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcprobe"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_corpus(dir: &Path, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let syn = synthetic::generate(n, seed);
    let corpus = dir.join("corpus.txt");
    let parses = dir.join("parses.conllu");
    std::fs::write(&corpus, syn.corpus_text()).unwrap();
    std::fs::write(&parses, &syn.conllu).unwrap();
    (corpus, parses)
}

const FIXED_BACKEND: &str = r#"
name = "fixed"
kind = "mock"

[mock]
variant = "fixed"
vocab = ["who", "which", "that", "woman", "book", "the"]
probs = [0.4, 0.2, 0.2, 0.1, 0.05, 0.05]
"#;

fn pipeline(root: &Path, corpus: &Path, parses: &Path) -> PathBuf {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = root.join("data");
    let probes = root.join("probes");
    let diag = root.join("diag");
    let cloze = root.join("cloze");
    let report = root.join("report");
    let fixed = root.join("fixed.toml");
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(&fixed, FIXED_BACKEND).unwrap();

    let (code, err) = run(&[
        "build-dataset", "--corpus", &s(corpus), "--parses", &s(parses), "--seed", "11", "--out", &s(&data),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run(&[
        "probe", "--dataset", &s(&data), "--backend", "rule", "--backend", "mock-separable",
        "--seed", "11", "--out", &s(&probes),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run(&[
        "diagnose", "--probe-dir", &s(&probes), "--backend", "mock-separable", "--seed", "11", "--out", &s(&diag),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run(&[
        "cloze", "--backend", &s(&fixed), "--seed", "11", "--out", &s(&cloze),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = run(&[
        "report", "--input", &s(&probes), "--input", &s(&diag), "--input", &s(&cloze), "--seed", "11",
        "--out", &s(&report),
    ]);
    assert_eq!(code, 0, "{err}");
    root.to_path_buf()
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["data", "probes", "diag", "cloze", "report"] {
        let mut files: Vec<PathBuf> = std::fs::read_dir(root.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.json")
            .collect();
        files.sort();
        for f in files {
            out.push((
                format!("{sub}/{}", f.file_name().unwrap().to_string_lossy()),
                std::fs::read(&f).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn full_pipeline_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = write_corpus(tmp.path(), 300, 4);
    let a = pipeline(&tmp.path().join("a"), &corpus, &parses);
    let b = pipeline(&tmp.path().join("b"), &corpus, &parses);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), sb.len());
    for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
    let summary = std::fs::read_to_string(a.join("report/summary.md")).unwrap();
    for backend in ["## rule", "## mock-separable", "## fixed"] {
        assert!(summary.contains(backend), "{summary}");
    }
}

#[test]
fn missing_parse_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.conllu");
    let (code, err) = run(&[
        "build-dataset", "--parses", missing.to_str().unwrap(), "--seed", "1", "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("nope.conllu"), "{err}");
}

#[test]
fn seed_is_mandatory() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, parses) = write_corpus(tmp.path(), 30, 1);
    let (code, err) = run(&["build-dataset", "--parses", parses.to_str().unwrap(), "--out", "x"]);
    assert_eq!(code, 1);
    assert!(err.contains("seed"), "{err}");
}

#[test]
fn failing_backend_does_not_stop_the_others() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = write_corpus(tmp.path(), 60, 2);
    let data = tmp.path().join("data");
    let (code, _) = run(&[
        "build-dataset", "--corpus", corpus.to_str().unwrap(), "--parses", parses.to_str().unwrap(),
        "--seed", "3", "--out", data.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let broken = tmp.path().join("broken.toml");
    std::fs::write(
        &broken,
        "name = \"broken\"\nkind = \"mlm\"\ncheckpoint = \"x\"\ncommand = [\"/nonexistent/adapter\"]\n",
    )
    .unwrap();
    let out = tmp.path().join("probes");
    let (code, err) = run(&[
        "probe", "--dataset", data.to_str().unwrap(), "--backend", broken.to_str().unwrap(),
        "--backend", "rule", "--seed", "3", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{err}");
    assert!(out.join("probe_rule.json").exists());
}

#[test]
fn config_file_supplies_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = write_corpus(tmp.path(), 90, 6);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 5\nout = \"data\"\ncorpus = {:?}\nparses = {:?}\ntest_fraction = 0.2\n",
            corpus.file_name().unwrap(),
            parses.file_name().unwrap()
        ),
    )
    .unwrap();
    let (code, err) = run(&["build-dataset", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("data/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["seed"], 5);
    assert_eq!(stats["splits"]["test"]["total"], 18);
}

#[test]
fn stale_inputs_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let (corpus, parses) = write_corpus(tmp.path(), 60, 8);
    let data = tmp.path().join("data");
    let (code, _) = run(&[
        "build-dataset", "--corpus", corpus.to_str().unwrap(), "--parses", parses.to_str().unwrap(),
        "--seed", "3", "--out", data.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    std::fs::write(&corpus, "changed\n").unwrap();
    let (code, err) = run(&[
        "probe", "--dataset", data.to_str().unwrap(), "--backend", "rule", "--seed", "3", "--out",
        tmp.path().join("p").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(err.contains("stale manifest"), "{err}");
}

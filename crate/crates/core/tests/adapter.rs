//! The subprocess backend against a scripted adapter.

use rcprobe_core::backends::subprocess::SubprocessMlm;
use rcprobe_core::backends::{Backend, Pooling};
use rcprobe_core::cloze::{score, TargetKind};
use rcprobe_core::pair_forge::{DatasetSample, ModificationKind, Split};
use rcprobe_core::prober::{layer_sweep, SweepConfig};
use rcprobe_core::RelativizerForm;

fn python() -> Option<String> {
    let ok = std::process::Command::new("python3")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success());
    ok.then(|| "python3".to_string())
}

fn spawn(checkpoint: &str) -> Option<rcprobe_core::Result<SubprocessMlm>> {
    let py = python()?;
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fake_adapter.py");
    Some(SubprocessMlm::spawn("fake", &[py, script.into()], checkpoint, None, None, None))
}

#[test]
fn embeddings_and_predictions_round_trip() {
    let Some(backend) = spawn("fake-ckpt") else {
        eprintln!("python3 not found; skipping");
        return;
    };
    let backend = backend.unwrap();
    assert_eq!(backend.num_layers(), 2);

    let emb = backend.embed_layers("the woman who left").unwrap();
    assert_eq!(emb.layers.len(), 3);
    assert_eq!(emb.layers[0].shape(), &[6, 6]);

    let tokens = backend.tokenize("the woman [MASK] left").unwrap();
    assert_eq!(tokens.mask_position, Some(3));
    let dist = backend.predict_masked(&tokens).unwrap();
    let s = score(&dist, "Which", TargetKind::Relativizer).unwrap();
    assert_eq!(s.target_rank, Some(2));
    assert_eq!(backend.word_piece_count("whom").unwrap(), 2);
    assert_eq!(backend.provenance().checkpoint.as_deref(), Some("fake-ckpt"));
}

#[test]
fn sweep_runs_over_adapter_layers() {
    let Some(backend) = spawn("fake-ckpt") else { return };
    let backend = backend.unwrap();
    let sample = |i: usize, label: bool, split: Split| DatasetSample {
        text: if label { format!("the woman who left {i}") } else { format!("the woman which left {i}") },
        label,
        modification: if label { ModificationKind::None } else { ModificationKind::WhoToWhich },
        animate: true,
        restrictive: true,
        subjrc: true,
        relativizer_form: RelativizerForm::Who,
        source_id: format!("s{i}"),
        split: Some(split),
        edit: None,
    };
    let data: Vec<_> = (0..40)
        .map(|i| sample(i, i % 2 == 0, if i < 30 { Split::Train } else { Split::Test }))
        .collect();
    let out = layer_sweep(&backend, &data, Pooling::Mean, &SweepConfig::default()).unwrap();
    assert_eq!(out.report.per_layer_accuracy.len(), 3);
    assert!(out.report.baseline_layer0.is_some());
}

#[test]
fn adapter_errors_surface_as_backend_errors() {
    let Some(result) = spawn("broken") else { return };
    let err = result.err().unwrap();
    assert!(err.is_backend(), "{err}");
    assert!(err.to_string().contains("no such checkpoint"));
}

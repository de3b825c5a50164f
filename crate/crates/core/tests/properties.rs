use proptest::prelude::*;

use rcprobe_core::backends::MaskedDistribution;
use rcprobe_core::cloze::{mtr, normalized_entropy, score, TargetKind};
use rcprobe_core::conllu::parse_str;
use rcprobe_core::extraction::{extract, ExtractionConfig};
use rcprobe_core::io::parse_corpus;
use rcprobe_core::pair_forge::{
    build_bags, sample_balanced, split, test_size, Bag, DatasetSample, LabelMode, ModificationKind,
    Split,
};
use rcprobe_core::synthetic;
use rcprobe_core::RelativizerForm;

fn vocab(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Rank by counting strictly better items; earlier index wins ties.
fn oracle_rank(probs: &[f64], t: usize) -> usize {
    1 + probs
        .iter()
        .enumerate()
        .filter(|&(j, &p)| p > probs[t] || (p == probs[t] && j < t))
        .count()
}

fn normalize(weights: &[u32]) -> Vec<f64> {
    let total: f64 = weights.iter().map(|&w| w as f64).sum();
    weights.iter().map(|&w| w as f64 / total).collect()
}

fn weights() -> impl Strategy<Value = Vec<u32>> {
    // Small integer weights give plenty of ties.
    prop::collection::vec(0u32..8, 1..=1000).prop_filter("non-zero mass", |w| w.iter().any(|&x| x > 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mtr_matches_sort_oracle(w in weights(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..6)) {
        let v = vocab(w.len());
        let probs = normalize(&w);
        let dist = MaskedDistribution::from_probs(&v, &probs).unwrap();
        let mut scored = Vec::new();
        let mut expected = 0.0;
        for p in &picks {
            let t = p.index(w.len());
            let s = score(&dist, &v[t], TargetKind::Antecedent).unwrap();
            prop_assert_eq!(s.target_rank, Some(oracle_rank(&probs, t)));
            expected += oracle_rank(&probs, t) as f64;
            scored.push(s);
        }
        let got = mtr(&scored).unwrap();
        prop_assert!((got - expected / picks.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn nme_is_bounded(w in weights()) {
        let v = vocab(w.len());
        let dist = MaskedDistribution::from_probs(&v, &normalize(&w)).unwrap();
        let h = normalized_entropy(&dist).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn nme_grows_when_mixed_toward_uniform(w in weights(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        prop_assume!(w.len() > 1);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-3);
        let v = vocab(w.len());
        let p = normalize(&w);
        let u = 1.0 / w.len() as f64;
        let mix = |t: f64| -> f64 {
            let q: Vec<f64> = p.iter().map(|x| (1.0 - t) * x + t * u).collect();
            normalized_entropy(&MaskedDistribution::from_probs(&v, &q).unwrap()).unwrap()
        };
        prop_assert!(mix(hi) >= mix(lo) - 1e-12);
    }
}

fn synthetic_bags(n: usize, seed: u64, mode: LabelMode) -> Vec<Bag> {
    let syn = synthetic::generate(n, seed);
    let parses = parse_str(&syn.conllu).unwrap();
    let corpus = parse_corpus(&syn.corpus_text()).unwrap();
    let out = extract(Some(&corpus), &parses, &ExtractionConfig::default()).unwrap();
    build_bags(&out.records, mode).unwrap()
}

fn label_diff<'a>(samples: impl IntoIterator<Item = &'a DatasetSample>) -> usize {
    let (mut t, mut f) = (0usize, 0usize);
    for s in samples {
        if s.label {
            t += 1;
        } else {
            f += 1;
        }
    }
    t.abs_diff(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn balanced_globally_and_per_split(
        n in 30usize..300,
        seed in any::<u64>(),
        appendix in any::<bool>(),
        denom in 3usize..12,
    ) {
        let mode = if appendix { LabelMode::Appendix } else { LabelMode::MainText };
        let bags = synthetic_bags(n, seed, mode);
        let sampled = sample_balanced(&bags, seed).unwrap();
        prop_assert!(sampled.warning.is_none());
        prop_assert!(label_diff(&sampled.samples) <= 1);
        let frac = 1.0 / denom as f64;
        let samples = split(sampled.samples, frac, seed).unwrap();
        let test: Vec<_> = samples.iter().filter(|s| s.split == Some(Split::Test)).collect();
        let train: Vec<_> = samples.iter().filter(|s| s.split == Some(Split::Train)).collect();
        prop_assert_eq!(test.len(), test_size(samples.len(), frac));
        prop_assert!(label_diff(test.iter().copied()) <= 1);
        prop_assert!(label_diff(train.iter().copied()) <= 1);
    }

    #[test]
    fn every_sample_restores_its_source(n in 30usize..200, seed in any::<u64>()) {
        let syn = synthetic::generate(n, seed);
        let parses = parse_str(&syn.conllu).unwrap();
        let out = extract(None, &parses, &ExtractionConfig::default()).unwrap();
        let bags = build_bags(&out.records, LabelMode::MainText).unwrap();
        for (bag, rec) in bags.iter().zip(&out.records) {
            for s in &bag.samples {
                prop_assert_eq!(s.restore_source(), rec.sentence.text.clone());
                prop_assert_eq!(s.modification == ModificationKind::None, s.text == rec.sentence.text);
            }
        }
    }

    #[test]
    fn one_sample_per_bag_and_source_kept_whole(n in 30usize..200, seed in any::<u64>()) {
        let bags = synthetic_bags(n, seed, LabelMode::MainText);
        let sampled = sample_balanced(&bags, seed).unwrap();
        prop_assert_eq!(sampled.samples.len(), bags.len());
        for (s, b) in sampled.samples.iter().zip(&bags) {
            prop_assert_eq!(&s.source_id, &b.source_id);
            prop_assert!(b.samples.contains(s));
        }
    }
}

fn flat_sample(i: usize, label: bool) -> DatasetSample {
    DatasetSample {
        text: format!("sentence {i}"),
        label,
        modification: if label { ModificationKind::None } else { ModificationKind::WhoToWhich },
        animate: true,
        restrictive: true,
        subjrc: true,
        relativizer_form: RelativizerForm::Who,
        source_id: format!("s{i}"),
        split: None,
        edit: None,
    }
}

#[test]
fn full_scale_split_sizes() {
    let samples: Vec<_> = (0..48_060).map(|i| flat_sample(i, i % 2 == 0)).collect();
    let out = split(samples, 1.0 / 9.0, 7).unwrap();
    let test: Vec<_> = out.iter().filter(|s| s.split == Some(Split::Test)).collect();
    let train: Vec<_> = out.iter().filter(|s| s.split == Some(Split::Train)).collect();
    assert_eq!((train.len(), test.len()), (42_720, 5_340));
    assert_eq!(label_diff(test.iter().copied()), 0);
    assert_eq!(label_diff(train.iter().copied()), 0);
}

#[test]
fn nme_closed_forms() {
    let v = vocab(4);
    let nme = |p: &[f64]| normalized_entropy(&MaskedDistribution::from_probs(&v, p).unwrap()).unwrap();
    assert!((nme(&[0.25; 4]) - 1.0).abs() < 1e-9);
    assert!(nme(&[0.0, 1.0, 0.0, 0.0]).abs() < 1e-9);
    assert!((nme(&[0.5, 0.5, 0.0, 0.0]) - 0.5).abs() < 1e-9);
}

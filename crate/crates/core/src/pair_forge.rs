//! Minimal-pair generation, balanced sampling and train/test split.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{RcRecord, RelativizerForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModificationKind {
    None,
    RelativizerOmission,
    WhoToWhich,
    WhichToWho,
    WhichToThat,
}

impl ModificationKind {
    pub const ALL: [ModificationKind; 5] = [
        ModificationKind::None,
        ModificationKind::RelativizerOmission,
        ModificationKind::WhoToWhich,
        ModificationKind::WhichToWho,
        ModificationKind::WhichToThat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModificationKind::None => "none",
            ModificationKind::RelativizerOmission => "relativizer_omission",
            ModificationKind::WhoToWhich => "who_to_which",
            ModificationKind::WhichToWho => "which_to_who",
            ModificationKind::WhichToThat => "which_to_that",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModificationKind::None => "no modification",
            ModificationKind::RelativizerOmission => "relativizer omission",
            ModificationKind::WhoToWhich => "who -> which",
            ModificationKind::WhichToWho => "which -> who",
            ModificationKind::WhichToThat => "which -> that",
        }
    }

    /// Whether the record's relativizer form admits this edit.
    pub fn accepts_form(self, form: RelativizerForm) -> bool {
        match self {
            ModificationKind::None | ModificationKind::RelativizerOmission => true,
            ModificationKind::WhoToWhich => {
                matches!(form, RelativizerForm::Who | RelativizerForm::Whom)
            }
            ModificationKind::WhichToWho | ModificationKind::WhichToThat => {
                form == RelativizerForm::Which
            }
        }
    }

    fn replacement(self) -> Option<&'static str> {
        match self {
            ModificationKind::WhoToWhich => Some("which"),
            ModificationKind::WhichToWho => Some("who"),
            ModificationKind::WhichToThat => Some("that"),
            ModificationKind::None | ModificationKind::RelativizerOmission => None,
        }
    }
}

impl fmt::Display for ModificationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modification {
    pub kind: ModificationKind,
    /// Acceptability of the modified sentence.
    pub label: bool,
}

/// How grammatical relativizer omission is labelled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Omission is grammatical for every restrictive object RC.
    #[default]
    MainText,
    /// Omission is grammatical only for animate restrictive object RCs.
    Appendix,
}

/// Paradigm rows for an (animate, restrictive, subjrc) triple.
pub fn applicable_modifications(
    animate: bool,
    restrictive: bool,
    subjrc: bool,
    mode: LabelMode,
) -> Vec<Modification> {
    let omission_ok = match mode {
        LabelMode::MainText => restrictive && !subjrc,
        LabelMode::Appendix => animate && restrictive && !subjrc,
    };
    let mut mods = vec![
        Modification {
            kind: ModificationKind::None,
            label: true,
        },
        Modification {
            kind: ModificationKind::RelativizerOmission,
            label: omission_ok,
        },
    ];
    if animate {
        mods.push(Modification {
            kind: ModificationKind::WhoToWhich,
            label: false,
        });
    } else {
        mods.push(Modification {
            kind: ModificationKind::WhichToWho,
            label: false,
        });
        // `that` cannot introduce a non-restrictive clause.
        if restrictive {
            mods.push(Modification {
                kind: ModificationKind::WhichToThat,
                label: true,
            });
        }
    }
    mods
}

/// Paradigm rows that also fit the record's relativizer form.
pub fn modifications_for(record: &RcRecord, mode: LabelMode) -> Vec<Modification> {
    applicable_modifications(record.animate, record.restrictive, record.subjrc, mode)
        .into_iter()
        .filter(|m| m.kind.accepts_form(record.relativizer_form))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Location of the edit in a modified sample: replacing `text[start..end]`
/// with `original` restores the source sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextEdit {
    pub start: usize,
    pub end: usize,
    pub original: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub text: String,
    pub label: bool,
    pub modification: ModificationKind,
    pub animate: bool,
    pub restrictive: bool,
    pub subjrc: bool,
    pub relativizer_form: RelativizerForm,
    pub source_id: String,
    /// Unset until [`split`] assigns one.
    pub split: Option<Split>,
    pub edit: Option<TextEdit>,
}

impl DatasetSample {
    /// Undo the edit, reproducing the source sentence.
    pub fn restore_source(&self) -> String {
        match &self.edit {
            None => self.text.clone(),
            Some(e) => {
                let mut out = String::with_capacity(self.text.len() + e.original.len());
                out.push_str(&self.text[..e.start]);
                out.push_str(&e.original);
                out.push_str(&self.text[e.end..]);
                out
            }
        }
    }
}

/// Copies the casing pattern of `original` onto `word`.
fn match_case(original: &str, word: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return word.to_uppercase();
    }
    match original.chars().next() {
        Some(c) if c.is_uppercase() => {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
        _ => word.to_lowercase(),
    }
}

/// Applies one modification to a record by editing the text at the
/// relativizer's span.
pub fn apply_modification(record: &RcRecord, modification: Modification) -> Result<DatasetSample> {
    let kind = modification.kind;
    if !kind.accepts_form(record.relativizer_form) {
        return Err(Error::ParadigmMismatch {
            kind,
            reason: format!("relativizer is `{}`", record.relativizer_form),
        });
    }
    let expected = applicable_modifications(
        record.animate,
        record.restrictive,
        record.subjrc,
        LabelMode::MainText,
    );
    if !expected.iter().any(|m| m.kind == kind) {
        return Err(Error::ParadigmMismatch {
            kind,
            reason: format!(
                "not in paradigm (animate={}, restrictive={}, subjrc={})",
                record.animate, record.restrictive, record.subjrc
            ),
        });
    }
    if kind == ModificationKind::None && !modification.label {
        return Err(Error::ParadigmMismatch {
            kind,
            reason: "unmodified sentences are always acceptable".into(),
        });
    }

    let text = &record.sentence.text;
    let (start, end) = record.sentence.tokens[record.relativizer_idx].char_span;
    let original = &text[start..end];

    let (new_text, edit) = match kind {
        ModificationKind::None => (text.clone(), None),
        ModificationKind::RelativizerOmission => {
            let bytes = text.as_bytes();
            let (cut_start, cut_end) = if bytes.get(end) == Some(&b' ') {
                (start, end + 1)
            } else if start > 0 && bytes[start - 1] == b' ' {
                (start - 1, end)
            } else {
                (start, end)
            };
            let mut out = String::with_capacity(text.len());
            out.push_str(&text[..cut_start]);
            out.push_str(&text[cut_end..]);
            let edit = TextEdit {
                start: cut_start,
                end: cut_start,
                original: text[cut_start..cut_end].to_string(),
            };
            (out, Some(edit))
        }
        _ => {
            let word = match_case(original, kind.replacement().expect("substitution"));
            let mut out = String::with_capacity(text.len() + 2);
            out.push_str(&text[..start]);
            out.push_str(&word);
            out.push_str(&text[end..]);
            let edit = TextEdit {
                start,
                end: start + word.len(),
                original: original.to_string(),
            };
            (out, Some(edit))
        }
    };

    Ok(DatasetSample {
        text: new_text,
        label: modification.label,
        modification: kind,
        animate: record.animate,
        restrictive: record.restrictive,
        subjrc: record.subjrc,
        relativizer_form: record.relativizer_form,
        source_id: record.id.clone(),
        split: None,
        edit,
    })
}

/// Every applicable variant of one source sentence, the original included.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    pub source_id: String,
    pub samples: Vec<DatasetSample>,
}

impl Bag {
    pub fn from_record(record: &RcRecord, mode: LabelMode) -> Result<Bag> {
        let samples = modifications_for(record, mode)
            .into_iter()
            .map(|m| apply_modification(record, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Bag {
            source_id: record.id.clone(),
            samples,
        })
    }

    fn offers(&self, label: bool) -> bool {
        self.samples.iter().any(|s| s.label == label)
    }
}

pub fn build_bags(records: &[RcRecord], mode: LabelMode) -> Result<Vec<Bag>> {
    records
        .par_iter()
        .map(|r| Bag::from_record(r, mode))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceWarning {
    pub acceptable: usize,
    pub unacceptable: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledDataset {
    pub samples: Vec<DatasetSample>,
    pub warning: Option<BalanceWarning>,
}

/// Picks one sample per bag so that the two labels end up as even as the
/// bags allow.
///
/// Bags are visited in a seeded random order with single-label bags first,
/// so that the flexible bags can absorb whatever imbalance the forced ones
/// leave. Within a bag the draw is uniform over the samples carrying the
/// current minority label, or over all samples when the counts are tied or
/// the bag cannot offer the minority label. Output keeps the input bag order.
pub fn sample_balanced(bags: &[Bag], seed: u64) -> Result<SampledDataset> {
    if let Some(empty) = bags.iter().find(|b| b.samples.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "bag {} is empty",
            empty.source_id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..bags.len()).collect();
    order.shuffle(&mut rng);
    order.sort_by_key(|&i| bags[i].offers(true) && bags[i].offers(false));

    let mut chosen: Vec<Option<usize>> = vec![None; bags.len()];
    let (mut n_true, mut n_false) = (0usize, 0usize);
    for &i in &order {
        let bag = &bags[i];
        let minority = match n_true.cmp(&n_false) {
            std::cmp::Ordering::Less => Some(true),
            std::cmp::Ordering::Greater => Some(false),
            std::cmp::Ordering::Equal => None,
        };
        let pool: Vec<usize> = match minority {
            Some(label) if bag.offers(label) => (0..bag.samples.len())
                .filter(|&j| bag.samples[j].label == label)
                .collect(),
            _ => (0..bag.samples.len()).collect(),
        };
        let pick = pool[rng.random_range(0..pool.len())];
        if bag.samples[pick].label {
            n_true += 1;
        } else {
            n_false += 1;
        }
        chosen[i] = Some(pick);
    }

    let samples: Vec<DatasetSample> = bags
        .iter()
        .zip(&chosen)
        .map(|(bag, pick)| bag.samples[pick.expect("every bag visited")].clone())
        .collect();

    let allowed = bags.len() % 2;
    let warning = (n_true.abs_diff(n_false) > allowed).then(|| BalanceWarning {
        acceptable: n_true,
        unacceptable: n_false,
        message: format!(
            "could not balance labels: {n_true} acceptable vs {n_false} unacceptable over {} bags",
            bags.len()
        ),
    });
    if let Some(w) = &warning {
        log::warn!("{}", w.message);
    }
    Ok(SampledDataset { samples, warning })
}

/// Number of test samples for a requested fraction.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (n as f64 * test_fraction).round() as usize
}

/// Assigns train/test by source sentence.
///
/// Sources are shuffled with the seed and drawn into the test split
/// alternating between acceptable-leaning and unacceptable-leaning sources
/// until the test split holds `round(n * test_fraction)` samples. With one
/// sample per source (the output of [`sample_balanced`]) both splits are
/// balanced to within one and the test size is exact.
pub fn split(
    mut samples: Vec<DatasetSample>,
    test_fraction: f64,
    seed: u64,
) -> Result<Vec<DatasetSample>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = samples.len();
    let n_test = test_size(n, test_fraction);

    // Group by source, preserving first-seen order.
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let g = *group_of.entry(s.source_id.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }

    let lean = |g: &Vec<usize>| -> i64 {
        g.iter()
            .map(|&i| if samples[i].label { 1 } else { -1 })
            .sum()
    };
    let total_lean: i64 = groups.iter().map(&lean).sum();
    // When n_test is odd the test split carries the surplus label of the
    // whole set, so the train split stays balanced as well.
    let target_true = if n_test % 2 == 1 && total_lean >= 0 {
        n_test / 2 + 1
    } else {
        n_test / 2
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut rng);
    let mut pos: Vec<usize> = order.iter().copied().filter(|&g| lean(&groups[g]) > 0).collect();
    let mut neg: Vec<usize> = order.iter().copied().filter(|&g| lean(&groups[g]) < 0).collect();
    let mut zero: Vec<usize> = order.iter().copied().filter(|&g| lean(&groups[g]) == 0).collect();
    // Pop from the back, so reverse to consume in shuffled order.
    pos.reverse();
    neg.reverse();
    zero.reverse();

    let mut in_test = vec![false; groups.len()];
    let (mut test_n, mut test_true) = (0usize, 0usize);
    let mut skipped: Vec<usize> = Vec::new();
    while test_n < n_test {
        let want_true = test_true < target_true;
        let want_false = (test_n - test_true) < n_test - target_true;
        let next = if want_true && !want_false {
            pos.pop().or_else(|| zero.pop()).or_else(|| neg.pop())
        } else if want_false && !want_true {
            neg.pop().or_else(|| zero.pop()).or_else(|| pos.pop())
        } else {
            zero.pop()
                .or_else(|| if test_true * 2 <= test_n { pos.pop() } else { neg.pop() })
                .or_else(|| pos.pop())
                .or_else(|| neg.pop())
        };
        let Some(g) = next else { break };
        if test_n + groups[g].len() > n_test {
            skipped.push(g);
            continue;
        }
        in_test[g] = true;
        test_n += groups[g].len();
        test_true += groups[g].iter().filter(|&&i| samples[i].label).count();
    }

    for (g, members) in groups.iter().enumerate() {
        let split = if in_test[g] { Split::Test } else { Split::Train };
        for &i in members {
            samples[i].split = Some(split);
        }
    }
    Ok(samples)
}

/// Counts per split and label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub total: usize,
    pub acceptable: BTreeMap<String, usize>,
    pub animate: BTreeMap<String, usize>,
    pub restrictive: BTreeMap<String, usize>,
    pub subjrc: BTreeMap<String, usize>,
    /// modification -> label ("0"/"1") -> count
    pub modifications: BTreeMap<ModificationKind, BTreeMap<String, usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub splits: BTreeMap<Split, SplitStats>,
    pub label_mode: LabelMode,
    pub seed: u64,
    pub test_fraction: f64,
    pub bags: usize,
    pub balance_warning: Option<BalanceWarning>,
}

fn bit(b: bool) -> String {
    if b { "1".into() } else { "0".into() }
}

pub fn split_stats<'a>(samples: impl IntoIterator<Item = &'a DatasetSample>) -> SplitStats {
    let mut st = SplitStats::default();
    for s in samples {
        st.total += 1;
        *st.acceptable.entry(bit(s.label)).or_default() += 1;
        *st.animate.entry(bit(s.animate)).or_default() += 1;
        *st.restrictive.entry(bit(s.restrictive)).or_default() += 1;
        *st.subjrc.entry(bit(s.subjrc)).or_default() += 1;
        *st.modifications
            .entry(s.modification)
            .or_default()
            .entry(bit(s.label))
            .or_default() += 1;
    }
    st
}

pub fn dataset_stats(
    samples: &[DatasetSample],
    label_mode: LabelMode,
    seed: u64,
    test_fraction: f64,
    bags: usize,
    balance_warning: Option<BalanceWarning>,
) -> DatasetStats {
    let mut splits = BTreeMap::new();
    for split in [Split::Train, Split::Test] {
        splits.insert(
            split,
            split_stats(samples.iter().filter(|s| s.split == Some(split))),
        );
    }
    DatasetStats {
        splits,
        label_mode,
        seed,
        test_fraction,
        bags,
        balance_warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::RcRecord;
    use crate::sentence::test_util::flat;

    fn record(text: &str, rel: usize, animate: bool, restrictive: bool, subjrc: bool) -> RcRecord {
        let sentence = flat(text);
        let form = RelativizerForm::from_surface(&sentence.tokens[rel].surface).unwrap();
        RcRecord {
            id: "r1".into(),
            rc_span: (rel, sentence.tokens.len()),
            sentence,
            relativizer_idx: rel,
            antecedent_idx: rel - 1,
            animate,
            restrictive,
            subjrc,
            relativizer_form: form,
        }
    }

    #[test]
    fn casing_is_copied() {
        assert_eq!(match_case("Which", "who"), "Who");
        assert_eq!(match_case("WHICH", "who"), "WHO");
        assert_eq!(match_case("which", "who"), "who");
    }

    #[test]
    fn omission_removes_following_space() {
        let r = record("anything which you want", 1, false, true, false);
        let m = Modification { kind: ModificationKind::RelativizerOmission, label: true };
        let s = apply_modification(&r, m).unwrap();
        assert_eq!(s.text, "anything you want");
        assert_eq!(s.restore_source(), "anything which you want");
    }

    #[test]
    fn omission_at_end_removes_preceding_space() {
        let r = record("the one that", 2, false, true, false);
        let m = Modification { kind: ModificationKind::RelativizerOmission, label: true };
        let s = apply_modification(&r, m).unwrap();
        assert_eq!(s.text, "the one");
        assert_eq!(s.restore_source(), "the one that");
    }

    #[test]
    fn form_mismatch_is_rejected() {
        let r = record("a letter that she wrote", 2, false, true, false);
        let m = Modification { kind: ModificationKind::WhichToWho, label: false };
        assert!(matches!(
            apply_modification(&r, m),
            Err(Error::ParadigmMismatch { .. })
        ));
    }

    #[test]
    fn paradigm_mismatch_is_rejected() {
        // which -> that is not available for non-restrictive clauses.
        let r = record("the pack , which she wears", 3, false, false, false);
        let m = Modification { kind: ModificationKind::WhichToThat, label: true };
        assert!(apply_modification(&r, m).is_err());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        assert!(split(Vec::new(), 0.0, 1).is_err());
        assert!(split(Vec::new(), 1.0, 1).is_err());
    }

    #[test]
    fn empty_bag_is_rejected() {
        let bag = Bag { source_id: "x".into(), samples: vec![] };
        assert!(sample_balanced(&[bag], 0).is_err());
    }
}

//! Targeted diagnostic sentences scored by a trained probe.
//!
//! Cases:
//! 1. antecedent and relativizer adjacent (acceptable)
//! 2. phrase between antecedent and relativizer (acceptable)
//! 3. three words between relativizer and RC verb (acceptable)
//! 4. wrong relativizer for the antecedent (unacceptable)
//! 5. wrong relativizer after an animate attractor (unacceptable)

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{pool, Backend, Pooling};
use crate::error::{Error, Result};
use crate::prober::{classify, probe_logit, LinearProbe};

pub const BUILTIN_SUITE_VERSION: &str = "builtin-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntecedentKind {
    Nominal,
    Clausal,
}

impl AntecedentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AntecedentKind::Nominal => "nominal",
            AntecedentKind::Clausal => "clausal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticSentence {
    pub text: String,
    pub case: u8,
    pub antecedent_kind: AntecedentKind,
    pub restrictive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervening_words: Option<usize>,
    pub expected_acceptable: bool,
    /// Last word of the antecedent; lets loaders check `intervening_words`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antecedent_word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relativizer_word: Option<String>,
    /// First verb of the RC; lets loaders check the case-3 gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc_verb_word: Option<String>,
    /// Authored for this suite rather than taken from a published example.
    #[serde(default)]
    pub reconstructed: bool,
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| c.is_ascii_punctuation() && c != '\'')
                .to_lowercase()
        })
        .collect()
}

fn position(ws: &[String], word: &str, from: usize) -> Option<usize> {
    let word = word.to_lowercase();
    ws.iter().skip(from).position(|w| *w == word).map(|p| p + from)
}

impl DiagnosticSentence {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSuite(format!("`{}`: {msg}", self.text)));
        if !(1..=5).contains(&self.case) {
            return fail(format!("case {} outside 1..=5", self.case));
        }
        let should_accept = self.case <= 3;
        if self.expected_acceptable != should_accept {
            return fail(format!("case {} expects acceptable={should_accept}", self.case));
        }
        if self.case >= 4 && !self.restrictive {
            return fail("cases 4 and 5 are restrictive only".into());
        }
        match (self.case, self.intervening_words) {
            (2, Some(n)) if (3..=7).contains(&n) => {}
            (2, Some(n)) => return fail(format!("{n} intervening words outside 3..=7")),
            (2, None) => return fail("case 2 needs intervening_words".into()),
            (_, Some(_)) => return fail("intervening_words is only for case 2".into()),
            _ => {}
        }
        let ws = words(&self.text);
        let rel = match &self.relativizer_word {
            Some(r) => Some(
                position(&ws, r, 0)
                    .ok_or_else(|| Error::InvalidSuite(format!("`{}`: relativizer `{r}` not found", self.text)))?,
            ),
            None => None,
        };
        if let (Some(n), Some(ante), Some(rel)) = (self.intervening_words, &self.antecedent_word, rel) {
            let a = ws[..rel]
                .iter()
                .rposition(|w| *w == ante.to_lowercase())
                .ok_or_else(|| Error::InvalidSuite(format!("`{}`: antecedent `{ante}` not found", self.text)))?;
            if rel - a - 1 != n {
                return fail(format!("{} words between antecedent and relativizer, declared {n}", rel - a - 1));
            }
        }
        if self.case == 3 {
            let (Some(rel), Some(verb)) = (rel, &self.rc_verb_word) else {
                return fail("case 3 needs relativizer_word and rc_verb_word".into());
            };
            let v = position(&ws, verb, rel + 1)
                .ok_or_else(|| Error::InvalidSuite(format!("`{}`: RC verb `{verb}` not found", self.text)))?;
            if v - rel - 1 != 3 {
                return fail(format!("{} words between relativizer and RC verb, expected 3", v - rel - 1));
            }
        }
        Ok(())
    }

    /// Case-2 length bucket.
    pub fn length_bucket(&self) -> Option<LengthBucket> {
        match self.intervening_words {
            Some(n) if n <= 4 => Some(LengthBucket::Short),
            Some(_) => Some(LengthBucket::Long),
            None => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LengthBucket {
    #[serde(rename = "3-4 words")]
    Short,
    #[serde(rename = ">4 words")]
    Long,
}

impl LengthBucket {
    pub fn as_str(self) -> &'static str {
        match self {
            LengthBucket::Short => "3-4 words",
            LengthBucket::Long => ">4 words",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticSuite {
    pub version: String,
    pub sentences: Vec<DiagnosticSentence>,
}

impl DiagnosticSuite {
    pub fn new(version: &str, sentences: Vec<DiagnosticSentence>) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::InvalidSuite("suite is empty".into()));
        }
        for s in &sentences {
            s.validate()?;
        }
        Ok(DiagnosticSuite {
            version: version.to_string(),
            sentences,
        })
    }

    /// Sentences in JSONL form, one object per line.
    pub fn to_jsonl(&self) -> Result<String> {
        crate::io::to_jsonl(&self.sentences)
    }

    /// SHA-256 of the JSONL form.
    pub fn digest(&self) -> Result<String> {
        Ok(crate::io::sha256_hex(self.to_jsonl()?.as_bytes()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let sentences: Vec<DiagnosticSentence> = crate::io::read_jsonl(path)?;
        let version = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "user".into());
        Self::new(&version, sentences)
    }
}

struct Family {
    kind: AntecedentKind,
    reconstructed: bool,
    /// Text up to and including the antecedent.
    head: &'static str,
    antecedent: &'static str,
    /// RC after the relativizer.
    tail: &'static str,
    rc_verb: &'static str,
    relativizer: &'static str,
    phrase: &'static str,
    /// Three words placed between relativizer and RC verb, and the
    /// case-3 remainder that follows them.
    gap: &'static str,
    gap_tail: &'static str,
    attractor: &'static str,
}

const FAMILIES: [Family; 4] = [
    Family {
        kind: AntecedentKind::Nominal,
        reconstructed: false,
        head: "We just heard a debate",
        antecedent: "debate",
        tail: "was about the differences in wage rates",
        rc_verb: "was",
        relativizer: "which",
        phrase: "on one of the most famous channels",
        gap: "in many regards",
        gap_tail: "was an important one about the differences in wage rates",
        attractor: "by DeGeneres",
    },
    Family {
        kind: AntecedentKind::Nominal,
        reconstructed: true,
        head: "They finally visited the museum",
        antecedent: "museum",
        tail: "was built by the first settlers",
        rc_verb: "was",
        relativizer: "which",
        phrase: "near the old harbor",
        gap: "according to locals",
        gap_tail: "was built by the first settlers",
        attractor: "of the governor",
    },
    Family {
        kind: AntecedentKind::Nominal,
        reconstructed: true,
        head: "My sister found the novel",
        antecedent: "novel",
        tail: "had been lost for many years",
        rc_verb: "had",
        relativizer: "which",
        phrase: "from the attic",
        gap: "to everyone's surprise",
        gap_tail: "had been lost for many years",
        attractor: "by her teacher",
    },
    Family {
        kind: AntecedentKind::Clausal,
        reconstructed: true,
        head: "The train arrived two hours late",
        antecedent: "late",
        tail: "annoyed all of the passengers",
        rc_verb: "annoyed",
        relativizer: "which",
        phrase: "on a cold Monday morning",
        gap: "to nobody's surprise",
        gap_tail: "annoyed all of the passengers",
        attractor: "for the mayor",
    },
];

/// The 32-sentence suite: four base sentences, each with restrictive and
/// non-restrictive variants of cases 1-3 and restrictive cases 4 and 5.
pub fn load_builtin_suite() -> DiagnosticSuite {
    let mut out = Vec::with_capacity(32);
    for f in &FAMILIES {
        let sentence = |case: u8, restrictive: bool, text: String| DiagnosticSentence {
            text,
            case,
            antecedent_kind: f.kind,
            restrictive,
            intervening_words: None,
            expected_acceptable: case <= 3,
            antecedent_word: Some(f.antecedent.to_string()),
            relativizer_word: Some(if case >= 4 { "who" } else { f.relativizer }.to_string()),
            rc_verb_word: Some(f.rc_verb.to_string()),
            reconstructed: f.reconstructed,
        };
        for restrictive in [true, false] {
            let comma = if restrictive { "" } else { "," };
            out.push(sentence(
                1,
                restrictive,
                format!("{}{comma} {} {}", f.head, f.relativizer, f.tail),
            ));
            let mut s2 = sentence(
                2,
                restrictive,
                format!("{} {}{comma} {} {}", f.head, f.phrase, f.relativizer, f.tail),
            );
            s2.intervening_words = Some(f.phrase.split_whitespace().count());
            out.push(s2);
            out.push(sentence(
                3,
                restrictive,
                format!("{}{comma} {} {} {}", f.head, f.relativizer, f.gap, f.gap_tail),
            ));
        }
        out.push(sentence(4, true, format!("{} who {}", f.head, f.tail)));
        out.push(sentence(
            5,
            true,
            format!("{} {} who {}", f.head, f.attractor, f.tail),
        ));
    }
    DiagnosticSuite::new(BUILTIN_SUITE_VERSION, out).expect("builtin suite is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemLogit {
    pub index: usize,
    pub text: String,
    pub case: u8,
    pub logit: f64,
    pub predicted_acceptable: bool,
    pub expected_acceptable: bool,
}

/// Row label of a report cell: an antecedent kind, or a case-2 length bucket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellFactor {
    Antecedent(AntecedentKind),
    Length(LengthBucket),
}

impl CellFactor {
    pub fn as_str(self) -> &'static str {
        match self {
            CellFactor::Antecedent(k) => k.as_str(),
            CellFactor::Length(b) => b.as_str(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticCell {
    pub case: u8,
    pub factor: CellFactor,
    pub restrictive: bool,
    pub count: usize,
    pub mean_logit: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub backend_id: String,
    pub layer: usize,
    pub pooling: Pooling,
    pub suite_version: String,
    pub suite_digest: String,
    /// Case x antecedent kind x restrictive, then case-2 length buckets.
    pub cells: Vec<DiagnosticCell>,
    pub accuracy: BTreeMap<u8, f64>,
    pub overall_accuracy: f64,
    pub items: Vec<ItemLogit>,
}

impl DiagnosticReport {
    pub fn cell(&self, case: u8, factor: CellFactor, restrictive: bool) -> Option<&DiagnosticCell> {
        self.cells
            .iter()
            .find(|c| c.case == case && c.factor == factor && c.restrictive == restrictive)
    }
}

fn correct(item: &ItemLogit) -> bool {
    item.predicted_acceptable == item.expected_acceptable
}

/// Aggregates per-item logits into report cells.
pub fn summarize(suite: &DiagnosticSuite, items: &[ItemLogit]) -> (Vec<DiagnosticCell>, BTreeMap<u8, f64>) {
    let mut groups: BTreeMap<(u8, CellFactor, bool), Vec<&ItemLogit>> = BTreeMap::new();
    for (s, item) in suite.sentences.iter().zip(items) {
        groups
            .entry((s.case, CellFactor::Antecedent(s.antecedent_kind), !s.restrictive))
            .or_default()
            .push(item);
        if let Some(b) = s.length_bucket() {
            groups
                .entry((s.case, CellFactor::Length(b), !s.restrictive))
                .or_default()
                .push(item);
        }
    }
    let cells = groups
        .into_iter()
        .map(|((case, factor, nonrestrictive), members)| {
            let n = members.len() as f64;
            DiagnosticCell {
                case,
                factor,
                restrictive: !nonrestrictive,
                count: members.len(),
                mean_logit: members.iter().map(|m| m.logit).sum::<f64>() / n,
                accuracy: members.iter().filter(|m| correct(m)).count() as f64 / n,
            }
        })
        .collect();
    let mut per_case: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for item in items {
        let e = per_case.entry(item.case).or_default();
        e.1 += 1;
        if correct(item) {
            e.0 += 1;
        }
    }
    let accuracy = per_case
        .into_iter()
        .map(|(c, (k, n))| (c, k as f64 / n as f64))
        .collect();
    (cells, accuracy)
}

/// Scores every suite sentence with the probe, using the probe's layer and
/// pooling.
pub fn evaluate_suite(
    probe: &LinearProbe,
    backend: &dyn Backend,
    suite: &DiagnosticSuite,
) -> Result<DiagnosticReport> {
    if probe.backend_id != backend.id() {
        log::warn!(
            "probe was trained on `{}` but is evaluated with `{}`",
            probe.backend_id,
            backend.id()
        );
    }
    let score = |(i, s): (usize, &DiagnosticSentence)| -> Result<ItemLogit> {
        let emb = backend.embed_layers(&s.text)?;
        let v = pool(&emb, probe.layer, probe.pooling, probe.include_specials)?;
        let logit = probe_logit(probe, &v.values)?;
        Ok(ItemLogit {
            index: i,
            text: s.text.clone(),
            case: s.case,
            logit,
            predicted_acceptable: classify(logit),
            expected_acceptable: s.expected_acceptable,
        })
    };
    let items: Vec<ItemLogit> = if backend.concurrent() {
        suite.sentences.par_iter().enumerate().map(score).collect::<Result<_>>()?
    } else {
        suite.sentences.iter().enumerate().map(score).collect::<Result<_>>()?
    };
    let (cells, accuracy) = summarize(suite, &items);
    let overall_accuracy = items.iter().filter(|i| correct(i)).count() as f64 / items.len() as f64;
    Ok(DiagnosticReport {
        backend_id: backend.id().to_string(),
        layer: probe.layer,
        pooling: probe.pooling,
        suite_version: suite.version.clone(),
        suite_digest: suite.digest()?,
        cells,
        accuracy,
        overall_accuracy,
        items,
    })
}

/// One row per case and factor, restrictive and non-restrictive mean logits
/// per report. Missing cells are left empty.
pub fn render_table_csv(reports: &[DiagnosticReport]) -> String {
    let mut rows: Vec<(u8, CellFactor)> = reports
        .iter()
        .flat_map(|r| r.cells.iter().map(|c| (c.case, c.factor)))
        .collect();
    rows.sort();
    rows.dedup();
    let mut out = String::from("case,factor");
    for r in reports {
        let _ = write!(out, ",{0}:restrictive,{0}:non_restrictive", r.backend_id);
    }
    out.push('\n');
    for (case, factor) in rows {
        let _ = write!(out, "{case},{}", factor.as_str());
        for r in reports {
            for restrictive in [true, false] {
                match r.cell(case, factor, restrictive) {
                    Some(c) => {
                        let _ = write!(out, ",{:.6}", c.mean_logit);
                    }
                    None => out.push(','),
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_suite_shape() {
        let suite = load_builtin_suite();
        assert_eq!(suite.sentences.len(), 32);
        let by_case = |c: u8| suite.sentences.iter().filter(|s| s.case == c).count();
        assert_eq!(
            [by_case(1), by_case(2), by_case(3), by_case(4), by_case(5)],
            [8, 8, 8, 4, 4]
        );
        let clausal = suite
            .sentences
            .iter()
            .filter(|s| s.antecedent_kind == AntecedentKind::Clausal)
            .count();
        assert_eq!(clausal, 8);
        let texts: Vec<&str> = suite.sentences.iter().map(|s| s.text.as_str()).collect();
        assert!(texts.contains(&"We just heard a debate which was about the differences in wage rates"));
        assert!(texts.contains(&"We just heard a debate who was about the differences in wage rates"));
        assert!(texts.contains(&"We just heard a debate by DeGeneres who was about the differences in wage rates"));
        assert!(texts.contains(
            &"We just heard a debate which in many regards was an important one about the differences in wage rates"
        ));
        assert!(suite
            .sentences
            .iter()
            .filter(|s| s.text.contains("debate"))
            .all(|s| !s.reconstructed));
    }

    #[test]
    fn case_two_lengths_cover_both_buckets() {
        let suite = load_builtin_suite();
        let lens: Vec<usize> = suite
            .sentences
            .iter()
            .filter_map(|s| s.intervening_words)
            .collect();
        assert_eq!(lens.len(), 8);
        assert!(lens.iter().all(|n| (3..=7).contains(n)));
        let short = lens.iter().filter(|&&n| n <= 4).count();
        assert_eq!(short, 4);
    }

    #[test]
    fn bad_case_three_gap_is_rejected() {
        let mut s = load_builtin_suite()
            .sentences
            .into_iter()
            .find(|s| s.case == 3)
            .unwrap();
        s.text = "We just heard a debate which in regards was about it".into();
        assert!(matches!(s.validate(), Err(Error::InvalidSuite(_))));
    }

    #[test]
    fn wrong_expectation_is_rejected() {
        let mut s = load_builtin_suite().sentences.remove(0);
        s.expected_acceptable = false;
        assert!(s.validate().is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(load_builtin_suite().digest().unwrap(), load_builtin_suite().digest().unwrap());
    }
}

//! Masked prediction of relativizers and antecedents.
//!
//! Relativizer targets match case-insensitively, antecedent targets exactly.
//! Targets that the backend splits into several pieces are skipped and
//! counted, never scored by a partial piece.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backends::{Backend, MaskedDistribution, MASK};
use crate::error::{Error, Result};
use crate::extraction::{RcRecord, RelativizerForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Relativizer,
    Antecedent,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Relativizer => "relativizer",
            TargetKind::Antecedent => "antecedent",
        }
    }

    pub fn matches(self, vocab_item: &str, target: &str) -> bool {
        match self {
            TargetKind::Relativizer => vocab_item.eq_ignore_ascii_case(target),
            TargetKind::Antecedent => vocab_item == target,
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relativizer" => Ok(TargetKind::Relativizer),
            "antecedent" => Ok(TargetKind::Antecedent),
            _ => Err(Error::InvalidArgument(format!("unknown target kind `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RcType {
    #[serde(rename = "subjRC")]
    SubjRc,
    #[serde(rename = "objRC")]
    ObjRc,
}

impl RcType {
    pub fn as_str(self) -> &'static str {
        match self {
            RcType::SubjRc => "subjRC",
            RcType::ObjRc => "objRC",
        }
    }
}

impl fmt::Display for RcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub text_with_mask: String,
    pub target: String,
    pub target_kind: TargetKind,
    pub rc_type: RcType,
    pub relativizer_form: RelativizerForm,
    pub source_id: String,
}

/// What a cloze instance is cut from: a sentence and the byte spans of its
/// antecedent and relativizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClozeSource {
    pub source_id: String,
    pub text: String,
    pub antecedent_span: (usize, usize),
    pub relativizer_span: (usize, usize),
    pub rc_type: RcType,
    pub relativizer_form: RelativizerForm,
    pub restrictive: bool,
}

impl ClozeSource {
    pub fn from_record(record: &RcRecord) -> Self {
        let tokens = &record.sentence.tokens;
        ClozeSource {
            source_id: record.id.clone(),
            text: record.sentence.text.clone(),
            antecedent_span: tokens[record.antecedent_idx].char_span,
            relativizer_span: tokens[record.relativizer_idx].char_span,
            rc_type: if record.subjrc { RcType::SubjRc } else { RcType::ObjRc },
            relativizer_form: record.relativizer_form,
            restrictive: record.restrictive,
        }
    }

    /// The instance for `kind`, ignoring the piece-count constraint.
    /// Non-restrictive sources give `None`.
    pub fn instance(&self, kind: TargetKind) -> Option<ClozeInstance> {
        if !self.restrictive {
            return None;
        }
        let (start, end) = match kind {
            TargetKind::Relativizer => self.relativizer_span,
            TargetKind::Antecedent => self.antecedent_span,
        };
        let text_with_mask = format!("{}{MASK}{}", &self.text[..start], &self.text[end..]);
        Some(ClozeInstance {
            text_with_mask,
            target: self.text[start..end].to_string(),
            target_kind: kind,
            rc_type: self.rc_type,
            relativizer_form: self.relativizer_form,
            source_id: self.source_id.clone(),
        })
    }
}

/// A target the backend splits into more than one piece.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTarget {
    pub source_id: String,
    pub target: String,
    pub pieces: usize,
    pub rc_type: RcType,
    pub relativizer_form: RelativizerForm,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeSet {
    pub instances: Vec<ClozeInstance>,
    pub skipped: Vec<SkippedTarget>,
    pub excluded_nonrestrictive: usize,
}

/// Masks the relativizer or antecedent of a restrictive record. `None` for
/// non-restrictive records and for multi-piece targets.
pub fn make_cloze(
    record: &RcRecord,
    kind: TargetKind,
    backend: &dyn Backend,
) -> Result<Option<ClozeInstance>> {
    let Some(inst) = ClozeSource::from_record(record).instance(kind) else {
        return Ok(None);
    };
    Ok((backend.word_piece_count(&inst.target)? == 1).then_some(inst))
}

pub fn build_cloze_set(
    sources: &[ClozeSource],
    kind: TargetKind,
    backend: &dyn Backend,
) -> Result<ClozeSet> {
    let mut set = ClozeSet::default();
    for src in sources {
        let Some(inst) = src.instance(kind) else {
            set.excluded_nonrestrictive += 1;
            continue;
        };
        let pieces = backend.word_piece_count(&inst.target)?;
        if pieces == 1 {
            set.instances.push(inst);
        } else {
            set.skipped.push(SkippedTarget {
                source_id: inst.source_id,
                target: inst.target,
                pieces,
                rc_type: inst.rc_type,
                relativizer_form: inst.relativizer_form,
            });
        }
    }
    Ok(set)
}

/// Rank, top prediction and entropy of one distribution against its target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub target: String,
    pub target_kind: TargetKind,
    /// 1-based; `None` if no vocabulary item matches.
    pub target_rank: Option<usize>,
    pub top: Vec<(String, f64)>,
    pub normalized_entropy: f64,
    pub vocab_size: usize,
}

impl ScoredPrediction {
    pub fn top1(&self) -> &str {
        self.top.first().map(|(t, _)| t.as_str()).unwrap_or("")
    }
}

/// H(p) / ln(V) with natural logarithms; zero for a one-item vocabulary.
pub fn normalized_entropy(dist: &MaskedDistribution) -> Result<f64> {
    if dist.vocab_size == 0 {
        return Err(Error::EmptyInput("zero-size vocabulary".into()));
    }
    if dist.vocab_size == 1 {
        return Ok(0.0);
    }
    let h: f64 = dist
        .entries
        .iter()
        .filter(|e| e.prob > 0.0)
        .map(|e| -e.prob * e.prob.ln())
        .sum();
    Ok((h / (dist.vocab_size as f64).ln()).clamp(0.0, 1.0))
}

pub const TOP_K: usize = 5;

pub fn score(dist: &MaskedDistribution, target: &str, kind: TargetKind) -> Result<ScoredPrediction> {
    let target_rank = dist
        .entries
        .iter()
        .position(|e| kind.matches(&e.token, target))
        .map(|p| p + 1);
    Ok(ScoredPrediction {
        target: target.to_string(),
        target_kind: kind,
        target_rank,
        top: dist
            .entries
            .iter()
            .take(TOP_K)
            .map(|e| (e.token.clone(), e.prob))
            .collect(),
        normalized_entropy: normalized_entropy(dist)?,
        vocab_size: dist.vocab_size,
    })
}

fn nonempty(results: &[ScoredPrediction]) -> Result<()> {
    if results.is_empty() {
        Err(Error::EmptyInput("no predictions".into()))
    } else {
        Ok(())
    }
}

/// Fraction of instances whose first-ranked item is the target.
pub fn mp_at_1(results: &[ScoredPrediction]) -> Result<f64> {
    nonempty(results)?;
    let hits = results.iter().filter(|r| r.target_rank == Some(1)).count();
    Ok(hits as f64 / results.len() as f64)
}

/// Mean 1-based target rank.
pub fn mtr(results: &[ScoredPrediction]) -> Result<f64> {
    nonempty(results)?;
    let mut sum = 0.0;
    for r in results {
        sum += r
            .target_rank
            .ok_or_else(|| Error::TargetNotInVocabulary(r.target.clone()))? as f64;
    }
    Ok(sum / results.len() as f64)
}

pub fn nme(results: &[ScoredPrediction]) -> Result<f64> {
    nonempty(results)?;
    Ok(results.iter().map(|r| r.normalized_entropy).sum::<f64>() / results.len() as f64)
}

/// Fraction of first-ranked items that are relativizers.
pub fn relativizer_ratio(results: &[ScoredPrediction]) -> Result<f64> {
    nonempty(results)?;
    let hits = results
        .iter()
        .filter(|r| RelativizerForm::from_surface(r.top1()).is_some())
        .count();
    Ok(hits as f64 / results.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClozeMetrics {
    pub mp_at_1: f64,
    pub mtr: f64,
    pub nme: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relativizer_ratio: Option<f64>,
    pub n_evaluated: usize,
    pub n_skipped: usize,
}

impl ClozeMetrics {
    pub fn compute(results: &[ScoredPrediction], n_skipped: usize) -> Result<Self> {
        let relativizer_ratio = if results
            .iter()
            .all(|r| r.target_kind == TargetKind::Relativizer)
        {
            Some(relativizer_ratio(results)?)
        } else {
            None
        };
        Ok(ClozeMetrics {
            mp_at_1: mp_at_1(results)?,
            mtr: mtr(results)?,
            nme: nme(results)?,
            relativizer_ratio,
            n_evaluated: results.len(),
            n_skipped,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub source_id: String,
    pub text_with_mask: String,
    pub rc_type: RcType,
    pub relativizer_form: RelativizerForm,
    #[serde(flatten)]
    pub scored: ScoredPrediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClozeCell {
    pub rc_type: RcType,
    pub relativizer_form: RelativizerForm,
    /// `None` when every instance of the cell was skipped.
    pub metrics: Option<ClozeMetrics>,
    pub n_skipped: usize,
}

impl ClozeCell {
    pub fn column(&self) -> String {
        format!("{}-{}", self.rc_type, self.relativizer_form)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClozeReport {
    pub backend_id: String,
    pub target_kind: TargetKind,
    pub cells: Vec<ClozeCell>,
    pub overall: Option<ClozeMetrics>,
    pub excluded_nonrestrictive: usize,
    pub predictions: Vec<PredictionRow>,
    pub skipped: Vec<SkippedTarget>,
}

/// Runs the backend on every instance and reduces per rc_type x form cell.
pub fn evaluate_cloze(backend: &dyn Backend, set: &ClozeSet, kind: TargetKind) -> Result<ClozeReport> {
    if !backend.capabilities().mlm_head {
        return Err(backend.unsupported("masked prediction"));
    }
    let run = |inst: &ClozeInstance| -> Result<PredictionRow> {
        let tokens = backend.tokenize(&inst.text_with_mask)?;
        let dist = backend.predict_masked(&tokens)?;
        Ok(PredictionRow {
            source_id: inst.source_id.clone(),
            text_with_mask: inst.text_with_mask.clone(),
            rc_type: inst.rc_type,
            relativizer_form: inst.relativizer_form,
            scored: score(&dist, &inst.target, inst.target_kind)?,
        })
    };
    let predictions: Vec<PredictionRow> = if backend.concurrent() {
        set.instances.par_iter().map(run).collect::<Result<_>>()?
    } else {
        set.instances.iter().map(run).collect::<Result<_>>()?
    };

    let mut groups: BTreeMap<(RcType, RelativizerForm), (Vec<ScoredPrediction>, usize)> = BTreeMap::new();
    for p in &predictions {
        groups
            .entry((p.rc_type, p.relativizer_form))
            .or_default()
            .0
            .push(p.scored.clone());
    }
    for s in &set.skipped {
        groups.entry((s.rc_type, s.relativizer_form)).or_default().1 += 1;
    }
    let cells = groups
        .into_iter()
        .map(|((rc_type, form), (scored, skipped))| {
            Ok(ClozeCell {
                rc_type,
                relativizer_form: form,
                metrics: if scored.is_empty() {
                    None
                } else {
                    Some(ClozeMetrics::compute(&scored, skipped)?)
                },
                n_skipped: skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<ScoredPrediction> = predictions.iter().map(|p| p.scored.clone()).collect();
    let overall = if all.is_empty() {
        None
    } else {
        Some(ClozeMetrics::compute(&all, set.skipped.len())?)
    };
    Ok(ClozeReport {
        backend_id: backend.id().to_string(),
        target_kind: kind,
        cells,
        overall,
        excluded_nonrestrictive: set.excluded_nonrestrictive,
        predictions,
        skipped: set.skipped.clone(),
    })
}

/// Rows are metrics, columns `rc_type-form` cells.
pub fn render_metrics_csv(report: &ClozeReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_string()];
    header.extend(report.cells.iter().map(ClozeCell::column));
    w.write_record(&header).map_err(csv_err)?;
    type Getter = fn(&ClozeMetrics) -> Option<f64>;
    let rows: [(&str, Getter); 6] = [
        ("MP@1", |m| Some(m.mp_at_1)),
        ("MTR", |m| Some(m.mtr)),
        ("NME", |m| Some(m.nme)),
        ("relativizer_ratio", |m| m.relativizer_ratio),
        ("n_evaluated", |m| Some(m.n_evaluated as f64)),
        ("n_skipped", |m| Some(m.n_skipped as f64)),
    ];
    for (name, get) in rows {
        let mut rec = vec![name.to_string()];
        for c in &report.cells {
            let v = match (&c.metrics, name) {
                (None, "n_skipped") => Some(c.n_skipped as f64),
                (None, "n_evaluated") => Some(0.0),
                (None, _) => None,
                (Some(m), _) => get(m),
            };
            rec.push(v.map(|v| format_number(name, v)).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn format_number(metric: &str, v: f64) -> String {
    if metric.starts_with("n_") {
        format!("{}", v as usize)
    } else {
        format!("{v:.6}")
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

// Qualitative annotation.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criteria {
    pub animacy: bool,
    pub plausibility: bool,
    pub grammaticality: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntecedentType {
    Identical,
    Synonym,
    Hypernym,
    Hyponym,
    Unrelated,
}

impl AntecedentType {
    pub const ALL: [AntecedentType; 5] = [
        AntecedentType::Identical,
        AntecedentType::Synonym,
        AntecedentType::Hypernym,
        AntecedentType::Hyponym,
        AntecedentType::Unrelated,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualitativeRecord {
    pub source_id: String,
    pub criteria: Criteria,
    #[serde(default)]
    pub antecedent_type: Option<AntecedentType>,
}

fn parse_flag(value: &str, line: usize, column: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Ok(true),
        "0" | "false" | "no" | "n" => Ok(false),
        other => Err(Error::Parse {
            line,
            message: format!("column {column}: expected a boolean, found `{other}`"),
        }),
    }
}

/// Reads annotation CSV with columns source_id, animacy, plausibility,
/// grammaticality, antecedent_type (the last may be empty).
pub fn parse_annotations_csv(input: &str) -> Result<Vec<QualitativeRecord>> {
    #[derive(Deserialize)]
    struct Row {
        source_id: String,
        animacy: String,
        plausibility: String,
        grammaticality: String,
        #[serde(default)]
        antecedent_type: Option<String>,
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let antecedent_type = match row.antecedent_type.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(t) => Some(
                serde_json::from_value(serde_json::Value::String(t.to_ascii_lowercase())).map_err(
                    |_| Error::Parse {
                        line,
                        message: format!("unknown antecedent type `{t}`"),
                    },
                )?,
            ),
        };
        out.push(QualitativeRecord {
            criteria: Criteria {
                animacy: parse_flag(&row.animacy, line, "animacy")?,
                plausibility: parse_flag(&row.plausibility, line, "plausibility")?,
                grammaticality: parse_flag(&row.grammaticality, line, "grammaticality")?,
            },
            source_id: row.source_id,
            antecedent_type,
        });
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<Vec<QualitativeRecord>> {
    parse_annotations_csv(&crate::io::read_to_string(path)?)
}

/// Plausible predictions must be grammatical.
pub fn check_entailment(records: &[QualitativeRecord]) -> Result<()> {
    let bad: Vec<String> = records
        .iter()
        .filter(|r| r.criteria.plausibility && !r.criteria.grammaticality)
        .map(|r| r.source_id.clone())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::EntailmentViolation(bad))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualitativeCell {
    pub rc_type: RcType,
    pub relativizer_form: RelativizerForm,
    pub count: usize,
    pub animacy: f64,
    pub plausibility: f64,
    pub grammaticality: f64,
    /// Over the records that carry an antecedent type; empty if none do.
    pub antecedent_types: BTreeMap<AntecedentType, f64>,
}

/// Proportions per rc_type x form cell. Cells come from the instances that
/// share each record's `source_id`.
pub fn aggregate_qualitative(
    records: &[QualitativeRecord],
    instances: &[ClozeInstance],
) -> Result<Vec<QualitativeCell>> {
    check_entailment(records)?;
    let cell_of: HashMap<&str, (RcType, RelativizerForm)> = instances
        .iter()
        .map(|i| (i.source_id.as_str(), (i.rc_type, i.relativizer_form)))
        .collect();
    let mut groups: BTreeMap<(RcType, RelativizerForm), Vec<&QualitativeRecord>> = BTreeMap::new();
    for r in records {
        let key = cell_of.get(r.source_id.as_str()).ok_or_else(|| {
            Error::InvalidArgument(format!("annotation for unknown source id `{}`", r.source_id))
        })?;
        groups.entry(*key).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((rc_type, form), rs)| {
            let n = rs.len() as f64;
            let share = |f: fn(&Criteria) -> bool| rs.iter().filter(|r| f(&r.criteria)).count() as f64 / n;
            let typed: Vec<AntecedentType> = rs.iter().filter_map(|r| r.antecedent_type).collect();
            let antecedent_types = if typed.is_empty() {
                BTreeMap::new()
            } else {
                AntecedentType::ALL
                    .iter()
                    .map(|t| {
                        let k = typed.iter().filter(|x| *x == t).count();
                        (*t, k as f64 / typed.len() as f64)
                    })
                    .collect()
            };
            QualitativeCell {
                rc_type,
                relativizer_form: form,
                count: rs.len(),
                animacy: share(|c| c.animacy),
                plausibility: share(|c| c.plausibility),
                grammaticality: share(|c| c.grammaticality),
                antecedent_types,
            }
        })
        .collect())
}

// Starter sentences.

struct Starter {
    text: &'static str,
    antecedent: &'static str,
    relativizer: &'static str,
    rc_type: RcType,
}

const fn st(text: &'static str, antecedent: &'static str, relativizer: &'static str, rc_type: RcType) -> Starter {
    Starter {
        text,
        antecedent,
        relativizer,
        rc_type,
    }
}

use RcType::{ObjRc, SubjRc};

const STARTERS: [Starter; 30] = [
    st("The woman who studies linguistics lives next door.", "woman", "who", SubjRc),
    st("The doctor who treated my father retired last year.", "doctor", "who", SubjRc),
    st("We met a farmer who grows rare apples.", "farmer", "who", SubjRc),
    st("The students who won the prize were invited to speak.", "students", "who", SubjRc),
    st("She called the lawyer who handled the case.", "lawyer", "who", SubjRc),
    st("The bridge which connects the islands was closed for repairs.", "bridge", "which", SubjRc),
    st("They sold the car which had a broken engine.", "car", "which", SubjRc),
    st("The report which describes the results is online.", "report", "which", SubjRc),
    st("We bought a lamp which needs special bulbs.", "lamp", "which", SubjRc),
    st("The river which flows through the town floods every spring.", "river", "which", SubjRc),
    st("The train that leaves at noon is always late.", "train", "that", SubjRc),
    st("He found a book that explains the theory.", "book", "that", SubjRc),
    st("The storm that hit the coast destroyed many houses.", "storm", "that", SubjRc),
    st("I need a tool that cuts metal.", "tool", "that", SubjRc),
    st("The song that won the contest was very short.", "song", "that", SubjRc),
    st("The teacher who we admired most moved away.", "teacher", "who", ObjRc),
    st("The singer who everyone loves cancelled the show.", "singer", "who", ObjRc),
    st("The man who she married is a pilot.", "man", "who", ObjRc),
    st("The nurse who the patients trusted was promoted.", "nurse", "who", ObjRc),
    st("The friend who I visited lives in Ohio.", "friend", "who", ObjRc),
    st("The house which they built is very small.", "house", "which", ObjRc),
    st("The letter which she wrote never arrived.", "letter", "which", ObjRc),
    st("The cake which we ordered was delicious.", "cake", "which", ObjRc),
    st("The movie which I watched was too long.", "movie", "which", ObjRc),
    st("The plan which the council approved costs too much.", "plan", "which", ObjRc),
    st("The diseases that we treat are often chronic.", "diseases", "that", ObjRc),
    st("The shirt that he bought was too small.", "shirt", "that", ObjRc),
    st("The songs that they played were new.", "songs", "that", ObjRc),
    st("The email that I sent got lost.", "email", "that", ObjRc),
    st("The road that we took was closed.", "road", "that", ObjRc),
];

fn word_span(text: &str, word: &str, before: usize) -> Option<(usize, usize)> {
    let re = Regex::new(&format!(r"\b{}\b", regex::escape(word))).ok()?;
    re.find_iter(&text[..before])
        .last()
        .map(|m| (m.start(), m.end()))
}

/// Thirty authored restrictive sentences, five per subjRC/objRC x
/// who/which/that cell. They are not corpus material.
pub fn starter_sources() -> Vec<ClozeSource> {
    static CACHE: OnceLock<Vec<ClozeSource>> = OnceLock::new();
    CACHE
        .get_or_init(|| {
            STARTERS
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let rel = word_span(s.text, s.relativizer, s.text.len()).expect("relativizer present");
                    let ante = word_span(s.text, s.antecedent, rel.0).expect("antecedent present");
                    ClozeSource {
                        source_id: format!("starter-{:02}", i + 1),
                        text: s.text.to_string(),
                        antecedent_span: ante,
                        relativizer_span: rel,
                        rc_type: s.rc_type,
                        relativizer_form: RelativizerForm::from_surface(s.relativizer).expect("relativizer"),
                        restrictive: true,
                    }
                })
                .collect()
        })
        .clone()
}

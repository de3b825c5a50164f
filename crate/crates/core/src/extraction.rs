//! Relative-clause identification and meta-data annotation.
//!
//! Extraction runs in two passes. The first pass is independent per
//! sentence: single-pronoun filter, `relcl` edge lookup, subject/object role
//! and restrictiveness. Its output feeds [`build_exclusive_wordlists`]. The
//! second pass resolves animacy for `that` relativizers against those lists
//! and drops every candidate with an undetermined variable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::conllu::ConlluSentence;
use crate::error::{Error, Result};
use crate::io::RawSentence;
use crate::sentence::ParsedSentence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelativizerForm {
    Who,
    Whom,
    Whose,
    Which,
    That,
}

impl RelativizerForm {
    pub const ALL: [RelativizerForm; 5] = [
        RelativizerForm::Who,
        RelativizerForm::Whom,
        RelativizerForm::Whose,
        RelativizerForm::Which,
        RelativizerForm::That,
    ];

    /// Case-insensitive lookup of a surface token.
    pub fn from_surface(surface: &str) -> Option<Self> {
        match surface.to_lowercase().as_str() {
            "who" => Some(RelativizerForm::Who),
            "whom" => Some(RelativizerForm::Whom),
            "whose" => Some(RelativizerForm::Whose),
            "which" => Some(RelativizerForm::Which),
            "that" => Some(RelativizerForm::That),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelativizerForm::Who => "who",
            RelativizerForm::Whom => "whom",
            RelativizerForm::Whose => "whose",
            RelativizerForm::Which => "which",
            RelativizerForm::That => "that",
        }
    }
}

impl fmt::Display for RelativizerForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn pronoun_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(?:who|whom|whose|which|that)\b").unwrap())
}

/// True iff the text holds exactly one word-boundary occurrence of who,
/// whom, whose, which or that (any case).
pub fn filter_single_pronoun(text: &str) -> bool {
    pronoun_regex().find_iter(text).take(2).count() == 1
}

/// Dependency labels driving the rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Labels marking the edge from an antecedent into the RC verb.
    pub relcl_labels: Vec<String>,
    pub subject_labels: Vec<String>,
    pub object_labels: Vec<String>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            relcl_labels: vec!["relcl".into(), "acl:relcl".into()],
            subject_labels: vec!["nsubj".into(), "nsubjpass".into()],
            object_labels: vec!["dobj".into(), "obj".into()],
        }
    }
}

/// Structural location of a relative clause inside a parse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcStructure {
    pub antecedent_idx: usize,
    pub rc_verb_idx: usize,
    /// Half-open token range of the RC verb's subtree.
    pub rc_span: (usize, usize),
    pub relativizer_idx: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RcRole {
    Subject,
    Object,
}

/// Locates the relative clause introduced by the sentence's single
/// relativizer-set token.
///
/// Returns `Ok(None)` when no `relcl` edge exists, when the pronoun token is
/// not unique, when it lies outside every RC subtree, or when the subtree is
/// not a contiguous token range.
pub fn find_relative_clause(
    parsed: &ParsedSentence,
    config: &ExtractionConfig,
) -> Result<Option<RcStructure>> {
    parsed.check_acyclic()?;

    let mut pronouns = parsed
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| RelativizerForm::from_surface(&t.surface).is_some())
        .map(|(i, _)| i);
    let relativizer_idx = match (pronouns.next(), pronouns.next()) {
        (Some(i), None) => i,
        _ => return Ok(None),
    };

    let mut best: Option<(usize, Vec<usize>)> = None;
    for (verb, tok) in parsed.tokens.iter().enumerate() {
        if !config.relcl_labels.iter().any(|l| l == &tok.dep_label) {
            continue;
        }
        let Some(_antecedent) = tok.head else { continue };
        let subtree = parsed.subtree(verb);
        if subtree.binary_search(&relativizer_idx).is_err() {
            continue;
        }
        // Innermost clause wins when RCs are nested.
        if best.as_ref().is_none_or(|(_, b)| subtree.len() < b.len()) {
            best = Some((verb, subtree));
        }
    }
    let Some((rc_verb_idx, subtree)) = best else {
        return Ok(None);
    };
    let (first, last) = (subtree[0], subtree[subtree.len() - 1]);
    if last - first + 1 != subtree.len() {
        return Ok(None);
    }
    let antecedent_idx = parsed.tokens[rc_verb_idx]
        .head
        .expect("relcl verb has a head");
    Ok(Some(RcStructure {
        antecedent_idx,
        rc_verb_idx,
        rc_span: (first, last + 1),
        relativizer_idx,
    }))
}

/// Subject or object RC from the relativizer's incoming label.
pub fn classify_role(
    rc: &RcStructure,
    parsed: &ParsedSentence,
    config: &ExtractionConfig,
) -> Option<RcRole> {
    let label = &parsed.tokens[rc.relativizer_idx].dep_label;
    if config.subject_labels.iter().any(|l| l == label) {
        Some(RcRole::Subject)
    } else if config.object_labels.iter().any(|l| l == label) {
        Some(RcRole::Object)
    } else {
        None
    }
}

/// Non-restrictive iff the token right before the relativizer is a comma.
pub fn annotate_restrictive(rc: &RcStructure, parsed: &ParsedSentence) -> bool {
    match rc.relativizer_idx.checked_sub(1) {
        Some(prev) => parsed.tokens[prev].surface != ",",
        None => true,
    }
}

/// A relative clause with role and restrictiveness resolved but animacy
/// still pending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcCandidate {
    pub id: String,
    pub sentence: ParsedSentence,
    pub structure: RcStructure,
    pub role: RcRole,
    pub restrictive: bool,
    pub relativizer_form: RelativizerForm,
}

impl RcCandidate {
    /// Case-folded lemma of the antecedent head.
    pub fn antecedent_lemma(&self) -> String {
        let tok = &self.sentence.tokens[self.structure.antecedent_idx];
        let lemma = if tok.lemma.is_empty() || tok.lemma == "_" {
            &tok.surface
        } else {
            &tok.lemma
        };
        lemma.to_lowercase()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnimacyWordlists {
    pub who_exclusive: BTreeSet<String>,
    pub which_exclusive: BTreeSet<String>,
}

/// Antecedent lemmas seen only with who/whom, and only with which.
/// `that` and `whose` candidates do not contribute.
pub fn build_exclusive_wordlists(candidates: &[RcCandidate]) -> AnimacyWordlists {
    let mut with_who = BTreeSet::new();
    let mut with_which = BTreeSet::new();
    for c in candidates {
        match c.relativizer_form {
            RelativizerForm::Who | RelativizerForm::Whom => {
                with_who.insert(c.antecedent_lemma());
            }
            RelativizerForm::Which => {
                with_which.insert(c.antecedent_lemma());
            }
            RelativizerForm::That | RelativizerForm::Whose => {}
        }
    }
    AnimacyWordlists {
        who_exclusive: with_who.difference(&with_which).cloned().collect(),
        which_exclusive: with_which.difference(&with_who).cloned().collect(),
    }
}

pub fn annotate_animacy(candidate: &RcCandidate, lists: &AnimacyWordlists) -> Option<bool> {
    match candidate.relativizer_form {
        RelativizerForm::Who | RelativizerForm::Whom => Some(true),
        RelativizerForm::Which => Some(false),
        RelativizerForm::That => {
            let lemma = candidate.antecedent_lemma();
            if lists.who_exclusive.contains(&lemma) {
                Some(true)
            } else if lists.which_exclusive.contains(&lemma) {
                Some(false)
            } else {
                None
            }
        }
        RelativizerForm::Whose => None,
    }
}

/// A grammatical corpus sentence with a fully annotated relative clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RcRecord {
    pub id: String,
    pub sentence: ParsedSentence,
    pub relativizer_idx: usize,
    pub antecedent_idx: usize,
    /// Half-open token range.
    pub rc_span: (usize, usize),
    pub animate: bool,
    pub restrictive: bool,
    pub subjrc: bool,
    pub relativizer_form: RelativizerForm,
}

impl RcRecord {
    pub fn from_candidate(candidate: RcCandidate, animate: bool) -> Self {
        RcRecord {
            id: candidate.id,
            relativizer_idx: candidate.structure.relativizer_idx,
            antecedent_idx: candidate.structure.antecedent_idx,
            rc_span: candidate.structure.rc_span,
            animate,
            restrictive: candidate.restrictive,
            subjrc: candidate.role == RcRole::Subject,
            relativizer_form: candidate.relativizer_form,
            sentence: candidate.sentence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sentence.tokens.len();
        if self.relativizer_idx >= n || self.antecedent_idx >= n {
            return Err(Error::InvalidSentence(format!(
                "record {}: token index out of range",
                self.id
            )));
        }
        let surface = &self.sentence.tokens[self.relativizer_idx].surface;
        if RelativizerForm::from_surface(surface) != Some(self.relativizer_form) {
            return Err(Error::InvalidSentence(format!(
                "record {}: relativizer token `{surface}` is not `{}`",
                self.id, self.relativizer_form
            )));
        }
        let (start, end) = self.rc_span;
        if !(start <= self.relativizer_idx && self.relativizer_idx < end && end <= n) {
            return Err(Error::InvalidSentence(format!(
                "record {}: rc_span {start}..{end} does not contain the relativizer",
                self.id
            )));
        }
        Ok(())
    }

    pub fn relativizer_surface(&self) -> &str {
        &self.sentence.tokens[self.relativizer_idx].surface
    }

    pub fn antecedent_surface(&self) -> &str {
        &self.sentence.tokens[self.antecedent_idx].surface
    }
}

/// Why a sentence did not become a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    NotSinglePronoun,
    NoRelativeClause,
    RoleUndetermined,
    WhoseRelativizer,
    AnimacyUndetermined,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub sentences: usize,
    pub records: usize,
    pub discarded: BTreeMap<DiscardReason, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionOutput {
    pub records: Vec<RcRecord>,
    pub wordlists: AnimacyWordlists,
    pub stats: ExtractionStats,
}

/// First pass for a single sentence.
pub fn candidate_from_parse(
    id: String,
    parsed: ParsedSentence,
    config: &ExtractionConfig,
) -> Result<std::result::Result<RcCandidate, DiscardReason>> {
    if !filter_single_pronoun(&parsed.text) {
        return Ok(Err(DiscardReason::NotSinglePronoun));
    }
    let Some(structure) = find_relative_clause(&parsed, config)? else {
        return Ok(Err(DiscardReason::NoRelativeClause));
    };
    let Some(role) = classify_role(&structure, &parsed, config) else {
        return Ok(Err(DiscardReason::RoleUndetermined));
    };
    let restrictive = annotate_restrictive(&structure, &parsed);
    let relativizer_form =
        RelativizerForm::from_surface(&parsed.tokens[structure.relativizer_idx].surface)
            .expect("relativizer token is a pronoun-set member");
    Ok(Ok(RcCandidate {
        id,
        sentence: parsed,
        structure,
        role,
        restrictive,
        relativizer_form,
    }))
}

/// Second pass: wordlists from all candidates, then animacy.
pub fn finalize(
    sentences: usize,
    first_pass: Vec<std::result::Result<RcCandidate, DiscardReason>>,
) -> ExtractionOutput {
    let mut stats = ExtractionStats {
        sentences,
        ..Default::default()
    };
    let mut candidates = Vec::new();
    for item in first_pass {
        match item {
            Ok(c) => candidates.push(c),
            Err(reason) => *stats.discarded.entry(reason).or_default() += 1,
        }
    }
    let wordlists = build_exclusive_wordlists(&candidates);
    let annotated: Vec<_> = candidates
        .into_par_iter()
        .map(|c| {
            if c.relativizer_form == RelativizerForm::Whose {
                return Err(DiscardReason::WhoseRelativizer);
            }
            match annotate_animacy(&c, &wordlists) {
                Some(animate) => Ok(RcRecord::from_candidate(c, animate)),
                None => Err(DiscardReason::AnimacyUndetermined),
            }
        })
        .collect();
    let mut records = Vec::new();
    for item in annotated {
        match item {
            Ok(r) => records.push(r),
            Err(reason) => *stats.discarded.entry(reason).or_default() += 1,
        }
    }
    stats.records = records.len();
    ExtractionOutput {
        records,
        wordlists,
        stats,
    }
}

/// Full extraction over parses, optionally aligned with a raw corpus by
/// order. Record ids derive from the sentence ordinal.
pub fn extract(
    corpus: Option<&[RawSentence]>,
    parses: &[ConlluSentence],
    config: &ExtractionConfig,
) -> Result<ExtractionOutput> {
    if let Some(corpus) = corpus {
        if corpus.len() != parses.len() {
            return Err(Error::InvalidArgument(format!(
                "corpus has {} sentences but the parse file has {}",
                corpus.len(),
                parses.len()
            )));
        }
    }
    let first_pass = parses
        .par_iter()
        .enumerate()
        .map(|(i, parse)| {
            let text = corpus.map(|c| c[i].text.as_str());
            // Cheap text filter before alignment.
            if let Some(t) = text {
                if !filter_single_pronoun(t) {
                    return Ok(Err(DiscardReason::NotSinglePronoun));
                }
            }
            let parsed = parse.to_parsed(text)?;
            candidate_from_parse(format!("s{:06}", i + 1), parsed, config).map_err(|e| {
                Error::Parse {
                    line: parse.line,
                    message: e.to_string(),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finalize(parses.len(), first_pass))
}

/// Index of records by id, for joins.
pub fn index_by_id(records: &[RcRecord]) -> HashMap<&str, &RcRecord> {
    records.iter().map(|r| (r.id.as_str(), r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_str;

    fn parse_one(conllu: &str) -> ParsedSentence {
        parse_str(conllu).unwrap()[0].to_parsed(None).unwrap()
    }

    const WOMAN: &str = "\
1\tKatrina\tKatrina\t_\t_\t_\t2\tcompound\t_\t_
2\tHaus\tHaus\t_\t_\t_\t3\tnsubj\t_\t_
3\twas\tbe\t_\t_\t_\t0\tROOT\t_\t_
4\ta\ta\t_\t_\t_\t5\tdet\t_\t_
5\twoman\twoman\t_\t_\t_\t3\tattr\t_\t_
6\twho\twho\t_\t_\t_\t7\tnsubj\t_\t_
7\tsought\tseek\t_\t_\t_\t5\trelcl\t_\t_
8\tto\tto\t_\t_\t_\t9\taux\t_\t_
9\tattract\tattract\t_\t_\t_\t7\txcomp\t_\t_
10\tstares\tstare\t_\t_\t_\t9\tdobj\t_\t_
";

    const LETTER: &str = "\
1\ta\ta\t_\t_\t_\t2\tdet\t_\t_
2\tletter\tletter\t_\t_\t_\t0\tROOT\t_\t_
3\twhich\twhich\t_\t_\t_\t5\tdobj\t_\t_
4\tshe\tshe\t_\t_\t_\t5\tnsubj\t_\t_
5\thands\thand\t_\t_\t_\t2\trelcl\t_\t_
6\tto\tto\t_\t_\t_\t5\tprep\t_\t_
7\tKevin\tKevin\t_\t_\t_\t6\tpobj\t_\t_
";

    #[test]
    fn single_pronoun_filter() {
        assert!(filter_single_pronoun(
            "Children who eat vegetables are likely to be healthy."
        ));
        assert!(!filter_single_pronoun("She ate an apple."));
        assert!(!filter_single_pronoun("The man who saw the dog that barked left."));
        assert!(!filter_single_pronoun("Whoever left the door open."));
        assert!(filter_single_pronoun("THAT is it."));
    }

    #[test]
    fn finds_subject_rc() {
        let p = parse_one(WOMAN);
        let rc = find_relative_clause(&p, &ExtractionConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(p.tokens[rc.antecedent_idx].surface, "woman");
        assert_eq!(p.tokens[rc.relativizer_idx].surface, "who");
        assert_eq!(rc.rc_span, (5, 10));
        assert_eq!(
            classify_role(&rc, &p, &ExtractionConfig::default()),
            Some(RcRole::Subject)
        );
        assert!(annotate_restrictive(&rc, &p));
    }

    #[test]
    fn finds_object_rc() {
        let p = parse_one(LETTER);
        let rc = find_relative_clause(&p, &ExtractionConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(p.tokens[rc.antecedent_idx].surface, "letter");
        assert_eq!(p.tokens[rc.relativizer_idx].surface, "which");
        assert_eq!(
            classify_role(&rc, &p, &ExtractionConfig::default()),
            Some(RcRole::Object)
        );
    }

    #[test]
    fn no_relcl_edge_yields_nothing() {
        let p = parse_one(
            "1\tShe\tshe\t_\t_\t_\t2\tnsubj\t_\t_\n2\tate\teat\t_\t_\t_\t0\tROOT\t_\t_\n3\tan\ta\t_\t_\t_\t4\tdet\t_\t_\n4\tapple\tapple\t_\t_\t_\t2\tdobj\t_\t_\n",
        );
        assert_eq!(
            find_relative_clause(&p, &ExtractionConfig::default()).unwrap(),
            None
        );
    }

    #[test]
    fn cyclic_parse_is_an_error() {
        let mut p = parse_one(LETTER);
        p.tokens[1].head = Some(4);
        assert!(matches!(
            find_relative_clause(&p, &ExtractionConfig::default()),
            Err(Error::MalformedTree(_))
        ));
    }

    #[test]
    fn role_labels() {
        let mut p = parse_one(LETTER);
        let rc = find_relative_clause(&p, &ExtractionConfig::default())
            .unwrap()
            .unwrap();
        let cfg = ExtractionConfig::default();
        p.tokens[rc.relativizer_idx].dep_label = "nsubj".into();
        assert_eq!(classify_role(&rc, &p, &cfg), Some(RcRole::Subject));
        p.tokens[rc.relativizer_idx].dep_label = "nsubjpass".into();
        assert_eq!(classify_role(&rc, &p, &cfg), Some(RcRole::Subject));
        p.tokens[rc.relativizer_idx].dep_label = "dobj".into();
        assert_eq!(classify_role(&rc, &p, &cfg), Some(RcRole::Object));
        p.tokens[rc.relativizer_idx].dep_label = "pobj".into();
        assert_eq!(classify_role(&rc, &p, &cfg), None);
    }

    #[test]
    fn restrictive_depends_on_preceding_comma() {
        let p = crate::sentence::test_util::flat("I never saw a penny in royalties , which was all right");
        let rc = RcStructure {
            antecedent_idx: 6,
            rc_verb_idx: 9,
            rc_span: (8, 12),
            relativizer_idx: 8,
        };
        assert!(!annotate_restrictive(&rc, &p));
        let first = RcStructure {
            relativizer_idx: 0,
            ..rc
        };
        assert!(annotate_restrictive(&first, &p));
    }

    #[test]
    fn empty_wordlists() {
        let lists = build_exclusive_wordlists(&[]);
        assert!(lists.who_exclusive.is_empty());
        assert!(lists.which_exclusive.is_empty());
    }
}

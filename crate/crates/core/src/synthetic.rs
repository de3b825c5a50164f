//! Seeded generator of parsed relative-clause sentences, for tests, benches
//! and offline demos. Output is a plain-text corpus plus matching CoNLL-U.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::extraction::RelativizerForm;

const ANIMATE: [&str; 12] = [
    "woman", "man", "doctor", "teacher", "student", "farmer", "lawyer", "nurse", "singer", "pilot",
    "artist", "writer",
];
const INANIMATE: [&str; 12] = [
    "book", "letter", "house", "car", "report", "bridge", "song", "lamp", "plan", "movie", "road",
    "river",
];
const DETERMINERS: [&str; 3] = ["The", "A", "This"];
/// Present-tense RC verbs with their lemma, followed by an object noun.
const SUBJ_VERBS: [(&str, &str); 5] = [
    ("needs", "need"),
    ("attracts", "attract"),
    ("deserves", "deserve"),
    ("mentions", "mention"),
    ("follows", "follow"),
];
const SUBJ_OBJECTS: [&str; 5] = ["help", "attention", "money", "praise", "music"];
const PRONOUNS: [&str; 5] = ["she", "he", "they", "we", "I"];
const OBJ_VERBS: [(&str, &str); 6] = [
    ("saw", "see"),
    ("liked", "like"),
    ("mentioned", "mention"),
    ("found", "find"),
    ("praised", "praise"),
    ("ignored", "ignore"),
];
const MAIN_VERBS: [(&str, &str); 6] = [
    ("arrived", "arrive"),
    ("vanished", "vanish"),
    ("mattered", "matter"),
    ("changed", "change"),
    ("stayed", "stay"),
    ("returned", "return"),
];

/// Meta-data of one generated sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub animate: bool,
    pub restrictive: bool,
    pub subjrc: bool,
    pub form: RelativizerForm,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub texts: Vec<String>,
    pub conllu: String,
    pub shapes: Vec<Shape>,
}

impl SyntheticCorpus {
    /// One sentence per line.
    pub fn corpus_text(&self) -> String {
        let mut s = self.texts.join("\n");
        s.push('\n');
        s
    }
}

struct Tok {
    form: String,
    lemma: String,
    head: usize,
    deprel: &'static str,
    space_after: bool,
}

fn tok(form: &str, lemma: &str, head: usize, deprel: &'static str) -> Tok {
    Tok {
        form: form.to_string(),
        lemma: lemma.to_string(),
        head,
        deprel,
        space_after: true,
    }
}

fn sentence(shape: Shape, rng: &mut impl Rng, noun: &str) -> Vec<Tok> {
    let det = *DETERMINERS.choose(rng).unwrap();
    let rel = shape.form.as_str();
    let (main, main_lemma) = *MAIN_VERBS.choose(rng).unwrap();
    // Offset of every index after the antecedent when commas are present.
    let c = usize::from(!shape.restrictive);
    let main_idx = 6 + 2 * c;
    let mut t = vec![
        tok(det, &det.to_lowercase(), 2, "det"),
        tok(noun, noun, main_idx, "nsubj"),
    ];
    if !shape.restrictive {
        t[1].space_after = false;
        t.push(tok(",", ",", 2, "punct"));
    }
    if shape.subjrc {
        let (verb, lemma) = *SUBJ_VERBS.choose(rng).unwrap();
        let obj = *SUBJ_OBJECTS.choose(rng).unwrap();
        t.push(tok(rel, rel, 4 + c, "nsubj"));
        t.push(tok(verb, lemma, 2, "relcl"));
        t.push(tok(obj, obj, 4 + c, "dobj"));
    } else {
        let pron = *PRONOUNS.choose(rng).unwrap();
        let (verb, lemma) = *OBJ_VERBS.choose(rng).unwrap();
        t.push(tok(rel, rel, 5 + c, "dobj"));
        t.push(tok(pron, &pron.to_lowercase(), 5 + c, "nsubj"));
        t.push(tok(verb, lemma, 2, "relcl"));
    }
    if !shape.restrictive {
        t.last_mut().unwrap().space_after = false;
        t.push(tok(",", ",", 2, "punct"));
    }
    let mut m = tok(main, main_lemma, 0, "root");
    m.space_after = false;
    t.push(m);
    t.push(tok(".", ".", main_idx, "punct"));
    t[0].form = capitalize(&t[0].form);
    t
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn render(out: &mut SyntheticCorpus, shape: Shape, tokens: Vec<Tok>) {
    let mut text = String::new();
    for (i, t) in tokens.iter().enumerate() {
        text.push_str(&t.form);
        if t.space_after && i + 1 < tokens.len() {
            text.push(' ');
        }
    }
    let n = out.texts.len() + 1;
    let _ = writeln!(out.conllu, "# sent_id = syn-{n}");
    let _ = writeln!(out.conllu, "# text = {text}");
    for (i, t) in tokens.iter().enumerate() {
        let misc = if t.space_after { "_" } else { "SpaceAfter=No" };
        let _ = writeln!(
            out.conllu,
            "{}\t{}\t{}\t_\t_\t_\t{}\t{}\t_\t{misc}",
            i + 1,
            t.form,
            t.lemma,
            t.head,
            t.deprel
        );
    }
    out.conllu.push('\n');
    out.texts.push(text);
    out.shapes.push(shape);
}

fn random_shape(rng: &mut impl Rng) -> Shape {
    use RelativizerForm::*;
    let animate = rng.random_bool(0.5);
    let restrictive = rng.random_bool(0.6);
    let subjrc = rng.random_bool(0.5);
    let options: &[RelativizerForm] = match (animate, restrictive, subjrc) {
        (true, true, true) => &[Who, Who, That],
        (true, true, false) => &[Who, Whom, That],
        (true, false, true) => &[Who],
        (true, false, false) => &[Who, Whom],
        (false, true, _) => &[Which, That],
        (false, false, _) => &[Which],
    };
    Shape {
        animate,
        restrictive,
        subjrc,
        form: *options.choose(rng).unwrap(),
    }
}

/// `n` sentences. The first 24 attest every noun with who or which so that
/// later `that` sentences resolve their animacy.
pub fn generate(n: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SyntheticCorpus::default();
    for i in 0..n {
        let (shape, noun) = if i < ANIMATE.len() {
            let s = Shape {
                animate: true,
                restrictive: true,
                subjrc: true,
                form: RelativizerForm::Who,
            };
            (s, ANIMATE[i])
        } else if i < ANIMATE.len() + INANIMATE.len() {
            let s = Shape {
                animate: false,
                restrictive: true,
                subjrc: true,
                form: RelativizerForm::Which,
            };
            (s, INANIMATE[i - ANIMATE.len()])
        } else {
            let s = random_shape(&mut rng);
            let pool: &[&str] = if s.animate { &ANIMATE } else { &INANIMATE };
            (s, *pool.choose(&mut rng).unwrap())
        };
        let tokens = sentence(shape, &mut rng, noun);
        render(&mut out, shape, tokens);
    }
    out
}

/// Eight sentences, one per (animate, restrictive, subjrc) combination,
/// using who for animate and which for inanimate antecedents.
pub fn paradigm_fixture() -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut out = SyntheticCorpus::default();
    for animate in [true, false] {
        for restrictive in [true, false] {
            for subjrc in [true, false] {
                let shape = Shape {
                    animate,
                    restrictive,
                    subjrc,
                    form: if animate {
                        RelativizerForm::Who
                    } else {
                        RelativizerForm::Which
                    },
                };
                let noun = if animate { "woman" } else { "letter" };
                let tokens = sentence(shape, &mut rng, noun);
                render(&mut out, shape, tokens);
            }
        }
    }
    out
}

//! Dictionary-driven detectors for the ten grammatical error types.
//!
//! Each detector counts error markers in a text. Counts divided by the word
//! count give marker densities, which feed both the featurizer model and the
//! rule-based mock LLM scorer. The detectors are shallow: they look at
//! adjacent tags, the current time frame, and the subject of the clause.

use alloc::string::String;
use alloc::vec::Vec;

use crate::inject::ErrorType;
use crate::lexicon::{
    subject_person, Aux, AuxTense, Lexicon, Person, Tag, TimeFrame, VerbForm, AUX_FORMS, INTRO_PHRASES, TIME_MARKERS,
};
use crate::text::{self, Token};

/// Per-token analysis used by detectors and injection site selection.
#[derive(Debug, Clone)]
pub struct WordInfo<'a> {
    /// Index in the whitespace tokenization of the text.
    pub index: usize,
    pub raw: &'a str,
    pub norm: String,
    pub tag: Tag,
    /// Part of a "you know" filler pair.
    pub filler: bool,
    /// First content word of the text or right after a sentence-final mark.
    pub sentence_initial: bool,
    pub frame: Option<TimeFrame>,
    /// For verbs and auxiliaries: the form is tensed and carries agreement.
    pub finite: bool,
    pub subject: Option<Person>,
    /// Auxiliary directly governing this verb.
    pub governed_by: Option<Aux>,
    pub after_to: bool,
}

impl WordInfo<'_> {
    pub fn trailing_punct(&self) -> bool {
        text::has_trailing_punct(self.raw)
    }

    pub fn is_verbal(&self) -> bool {
        matches!(self.tag, Tag::Verb { .. } | Tag::Aux { .. })
    }
}

/// Tags every token of `tokens` and resolves clause-level context.
pub fn analyze<'a>(lex: &Lexicon, tokens: &[Token<'a>]) -> Vec<WordInfo<'a>> {
    let mut words: Vec<WordInfo<'a>> = tokens
        .iter()
        .enumerate()
        .map(|(index, tok)| {
            let norm = text::normalize(tok.text);
            let tag = lex.tag(&norm);
            WordInfo {
                index,
                raw: tok.text,
                norm,
                tag,
                filler: tag == Tag::Filler,
                sentence_initial: false,
                frame: None,
                finite: false,
                subject: None,
                governed_by: None,
                after_to: false,
            }
        })
        .collect();

    // "you know" counts as one filler when followed by more text
    for i in 0..words.len().saturating_sub(1) {
        if words[i].norm == "you" && words[i + 1].norm == "know" && !words[i].trailing_punct() {
            words[i].filler = true;
            words[i + 1].filler = true;
        }
    }

    let mut frame = None;
    let mut subject: Option<Person> = None;
    let mut prev: Option<usize> = None;
    for i in 0..words.len() {
        if words[i].filler {
            continue;
        }
        let initial = match prev {
            None => true,
            Some(p) => text::ends_sentence(words[p].raw),
        };
        if initial {
            subject = None;
            frame = None;
        }
        if let Some((_, f)) = TIME_MARKERS.iter().find(|(w, _)| *w == words[i].norm) {
            frame = Some(*f);
        }
        let w = &mut words[i];
        w.sentence_initial = initial;
        w.frame = frame;

        if w.is_verbal() {
            let (ptag, pnorm, ppunct) = match prev {
                Some(p) => (Some(words[p].tag), words[p].norm.as_str(), words[p].trailing_punct()),
                None => (None, "", true),
            };
            let mut finite = true;
            let mut subj = None;
            let mut governed = None;
            let mut after_to = false;
            if !ppunct {
                match ptag {
                    Some(Tag::Aux { index }) => {
                        finite = false;
                        governed = Some(AUX_FORMS[index].1);
                    }
                    Some(Tag::Prep) if pnorm == "to" => {
                        finite = false;
                        after_to = true;
                    }
                    Some(Tag::Conj) => subj = subject,
                    Some(t) => {
                        subj = subject_person(t);
                        if subj.is_some() {
                            subject = subj;
                        }
                    }
                    None => {}
                }
            }
            let w = &mut words[i];
            w.finite = finite;
            w.subject = if finite { subj } else { None };
            w.governed_by = governed;
            w.after_to = after_to;
        }
        prev = Some(i);
    }
    words
}

/// Marker counts per error type, in [`ErrorType::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MarkerCounts {
    pub counts: [usize; ErrorType::COUNT],
    pub word_count: usize,
}

impl MarkerCounts {
    pub fn get(&self, ty: ErrorType) -> usize {
        self.counts[ty as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Count divided by word count, per type.
    pub fn densities(&self) -> [f64; ErrorType::COUNT] {
        let wc = self.word_count.max(1) as f64;
        let mut out = [0.0; ErrorType::COUNT];
        for (o, c) in out.iter_mut().zip(self.counts) {
            *o = c as f64 / wc;
        }
        out
    }

    pub fn total_density(&self) -> f64 {
        self.total() as f64 / self.word_count.max(1) as f64
    }
}

/// Runs every detector over `text`.
pub fn detect(lex: &Lexicon, text: &str) -> MarkerCounts {
    let tokens = text::tokenize(text);
    let words = analyze(lex, &tokens);
    let mut counts = [0usize; ErrorType::COUNT];

    let filler_count = words
        .iter()
        .enumerate()
        .filter(|(i, w)| w.filler && !(w.norm == "know" && *i > 0 && words[i - 1].filler && words[i - 1].norm == "you"))
        .count();
    counts[ErrorType::FillerWord as usize] = filler_count;

    let content: Vec<&WordInfo<'_>> = words.iter().filter(|w| !w.filler).collect();
    counts[ErrorType::RedundantPhrase as usize] = count_repeats(&content);
    counts[ErrorType::WordOrder as usize] = count_order_anomalies(&content);
    counts[ErrorType::Punctuation as usize] = count_punctuation(&content);

    for (k, w) in content.iter().enumerate() {
        let prev = k.checked_sub(1).map(|p| content[p]);
        let next = content.get(k + 1).copied();
        match w.tag {
            Tag::Verb { form, .. } => {
                if verb_form_error(w, form) {
                    counts[ErrorType::VerbForm as usize] += 1;
                }
                if w.finite {
                    let tense = match form {
                        VerbForm::Base | VerbForm::Third => Some(TimeFrame::Present),
                        VerbForm::Past => Some(TimeFrame::Past),
                        _ => None,
                    };
                    if tense.is_some() && w.frame.is_some() && tense != w.frame {
                        counts[ErrorType::Tense as usize] += 1;
                    }
                    if let Some(person) = w.subject {
                        let bad = match form {
                            VerbForm::Base => person == Person::ThirdSingular,
                            VerbForm::Third => person != Person::ThirdSingular,
                            _ => false,
                        };
                        if bad {
                            counts[ErrorType::SubjectVerbAgreement as usize] += 1;
                        }
                    }
                }
            }
            Tag::Aux { index } => {
                let (_, _, tense, agreement) = AUX_FORMS[index];
                if w.finite {
                    let frame = match tense {
                        AuxTense::Present => Some(TimeFrame::Present),
                        AuxTense::Past => Some(TimeFrame::Past),
                        AuxTense::Untensed => None,
                    };
                    if frame.is_some() && w.frame.is_some() && frame != w.frame {
                        counts[ErrorType::Tense as usize] += 1;
                    }
                    if let (Some(person), Some(agr)) = (w.subject, agreement) {
                        if !agr.agrees(person) {
                            counts[ErrorType::SubjectVerbAgreement as usize] += 1;
                        }
                    }
                }
            }
            Tag::Prep => {
                if let Some(p) = prev.filter(|p| !p.trailing_punct()) {
                    if let Some(allowed) = lex.licensed_preps(&p.norm) {
                        if !allowed.is_empty() && !allowed.contains(&w.norm.as_str()) {
                            counts[ErrorType::Preposition as usize] += 1;
                        }
                    }
                }
            }
            Tag::ObjPron => {
                let before_verb = !w.trailing_punct() && next.is_some_and(|n| n.is_verbal());
                if before_verb || w.sentence_initial {
                    counts[ErrorType::Pronoun as usize] += 1;
                }
            }
            Tag::SubjPron(_) => {
                if prev.is_some_and(|p| p.tag == Tag::Prep && !p.trailing_punct()) {
                    counts[ErrorType::Pronoun as usize] += 1;
                }
            }
            Tag::Unknown if lex.is_near_miss(&w.norm) => {
                counts[ErrorType::Spelling as usize] += 1;
            }
            _ => {}
        }
    }

    MarkerCounts {
        counts,
        word_count: tokens.len(),
    }
}

fn verb_form_error(w: &WordInfo<'_>, form: VerbForm) -> bool {
    match form {
        VerbForm::Ing => w.governed_by != Some(Aux::Be),
        VerbForm::Participle => !matches!(w.governed_by, Some(Aux::Be | Aux::Have)),
        VerbForm::Base | VerbForm::Third => w.governed_by == Some(Aux::Be),
        VerbForm::Past => false,
    }
}

fn count_repeats(content: &[&WordInfo<'_>]) -> usize {
    let norms: Vec<&str> = content.iter().map(|w| w.norm.as_str()).collect();
    let mut count = 0;
    let mut i = 0;
    while i < norms.len() {
        if i + 3 < norms.len() && !norms[i].is_empty() && norms[i] == norms[i + 2] && norms[i + 1] == norms[i + 3] {
            count += 1;
            i += 4;
        } else if i + 1 < norms.len() && !norms[i].is_empty() && norms[i] == norms[i + 1] {
            count += 1;
            i += 2;
        } else {
            i += 1;
        }
    }
    count
}

/// Tag bigrams that do not occur in well-formed text.
pub(crate) fn order_anomaly(a: Tag, b: Tag) -> bool {
    use Tag::*;
    match a {
        Det => !matches!(b, Noun { .. } | Adj | Unknown | Time),
        Prep => matches!(b, Verb { .. } | Aux { .. } | Prep | Conj),
        Noun { .. } => matches!(b, Det | SubjPron(_)),
        Verb { .. } => matches!(b, SubjPron(_)),
        SubjPron(_) => matches!(b, Det | Prep | Noun { .. } | Adj | Conj),
        Conj => matches!(b, Prep | Conj),
        Adj => matches!(b, Aux { .. } | Det),
        _ => false,
    }
}

/// Runs of consecutive anomalous bigrams; one swapped pair disturbs up to
/// three bigrams but counts once.
fn count_order_anomalies(content: &[&WordInfo<'_>]) -> usize {
    let mut runs = 0;
    let mut in_run = false;
    for pair in content.windows(2) {
        let bad = !pair[0].trailing_punct() && order_anomaly(pair[0].tag, pair[1].tag);
        if bad && !in_run {
            runs += 1;
        }
        in_run = bad;
    }
    runs
}

fn count_punctuation(content: &[&WordInfo<'_>]) -> usize {
    let mut count = 0;
    for (k, w) in content.iter().enumerate() {
        let capital = text::is_capitalized(text::split_parts(w.raw).core);
        if !w.sentence_initial && capital && w.norm != "i" {
            count += 1;
        }
        if k > 0 && w.sentence_initial && !capital && w.norm.chars().next().is_some_and(char::is_alphabetic) {
            count += 1;
        }
        if w.sentence_initial || capital {
            if let Some(len) = intro_phrase_len(content, k) {
                let last = content[k + len - 1];
                if text::split_parts(last.raw).suffix.is_empty() {
                    count += 1;
                }
            }
        }
    }
    if let Some(last) = content.last() {
        if !text::ends_sentence(last.raw) {
            count += 1;
        }
    }
    count
}

/// Length of the intro adverbial starting at `k`, if any.
fn intro_phrase_len(content: &[&WordInfo<'_>], k: usize) -> Option<usize> {
    INTRO_PHRASES.iter().find_map(|(phrase, _)| {
        let n = phrase.len();
        if k + n > content.len() {
            return None;
        }
        let matches = phrase
            .iter()
            .zip(&content[k..k + n])
            .enumerate()
            .all(|(j, (p, w))| *p == w.norm && (j + 1 == n || !w.trailing_punct()));
        matches.then_some(n)
    })
}

//! Template-generated corpus with known true scores.
//!
//! Clean paragraphs are assembled from the lexicon tables so they trip no
//! marker detector. Each sample then receives errors of up to three types,
//! and its true score falls linearly with the total achieved intensity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Modality, Provenance, Record, Sample, Split, MAX_SCORE, MIN_SCORE};
use crate::error::{validation, Result};
use crate::inject::{inject_with, mix, ErrorSpec, ErrorType};
use crate::lexicon::{
    Lexicon, Person, TimeFrame, Verb, ADJECTIVES, INTRO_PHRASES, OBJECTS, OBJECT_VERBS, PLACES, PLACE_VERBS,
    PLURAL_SUBJECTS, SINGULAR_SUBJECTS, SOCIAL_VERBS, TOPICS,
};
use crate::text::capitalize;

/// Provenance model name attached to true-score labels.
pub const TRUE_SCORE_MODEL: &str = "synthetic-true-score";

const SUBJECT_PRONOUNS: &[(&str, Person)] = &[
    ("I", Person::FirstSingular),
    ("he", Person::ThirdSingular),
    ("she", Person::ThirdSingular),
    ("we", Person::Plural),
    ("they", Person::Plural),
    ("you", Person::Plural),
];

const OBJECT_PRONOUNS: &[&str] = &["me", "him", "her", "us", "them"];

struct Subject {
    words: String,
    person: Person,
}

fn pronoun_subject(rng: &mut ChaCha8Rng) -> Subject {
    let (w, p) = *SUBJECT_PRONOUNS.choose(rng).unwrap();
    Subject {
        words: String::from(w),
        person: p,
    }
}

fn subject(rng: &mut ChaCha8Rng) -> Subject {
    match rng.random_range(0..3) {
        0 => Subject {
            words: format!("the {}", SINGULAR_SUBJECTS.choose(rng).unwrap()),
            person: Person::ThirdSingular,
        },
        1 => Subject {
            words: format!("the {}", PLURAL_SUBJECTS.choose(rng).unwrap()),
            person: Person::Plural,
        },
        _ => pronoun_subject(rng),
    }
}

fn finite(verb: &Verb, person: Person, frame: TimeFrame) -> &'static str {
    match (frame, person) {
        (TimeFrame::Past, _) => verb.past,
        (TimeFrame::Present, Person::ThirdSingular) => verb.third,
        (TimeFrame::Present, _) => verb.base,
    }
}

fn be(person: Person, frame: TimeFrame) -> &'static str {
    match (frame, person) {
        (TimeFrame::Present, Person::FirstSingular) => "am",
        (TimeFrame::Present, Person::ThirdSingular) => "is",
        (TimeFrame::Present, Person::Plural) => "are",
        (TimeFrame::Past, Person::Plural) => "were",
        (TimeFrame::Past, _) => "was",
    }
}

fn social_clause(rng: &mut ChaCha8Rng, person: Person, frame: TimeFrame) -> String {
    let v = SOCIAL_VERBS.choose(rng).unwrap();
    format!(
        "{} {} {}",
        finite(v, person, frame),
        v.preps.choose(rng).unwrap(),
        OBJECT_PRONOUNS.choose(rng).unwrap()
    )
}

/// One clean sentence, starting with a time adverbial and a comma.
pub fn clean_sentence(rng: &mut ChaCha8Rng) -> String {
    let (intro, frame) = *INTRO_PHRASES.choose(rng).unwrap();
    let mut intro = intro.join(" ");
    intro = capitalize(&intro);
    let body = match rng.random_range(0..6) {
        0 | 1 => {
            let s = subject(rng);
            let v = PLACE_VERBS.choose(rng).unwrap();
            let mut b = format!(
                "{} {} {} the {}",
                s.words,
                finite(v, s.person, frame),
                v.preps[0],
                PLACES.choose(rng).unwrap()
            );
            if rng.random_bool(0.5) {
                b.push_str(" and ");
                b.push_str(&social_clause(rng, s.person, frame));
            }
            b
        }
        2 => {
            let s = subject(rng);
            let v = OBJECT_VERBS.choose(rng).unwrap();
            let (obj, _) = OBJECTS.choose(rng).unwrap();
            format!(
                "{} {} the {} for {}",
                s.words,
                finite(v, s.person, frame),
                obj,
                OBJECT_PRONOUNS.choose(rng).unwrap()
            )
        }
        3 => {
            let s = subject(rng);
            let (adj, preps) = ADJECTIVES.choose(rng).unwrap();
            format!(
                "{} {} {} {} the {}",
                s.words,
                be(s.person, frame),
                adj,
                preps.choose(rng).unwrap(),
                TOPICS.choose(rng).unwrap()
            )
        }
        4 => {
            let a = pronoun_subject(rng);
            let b = pronoun_subject(rng);
            format!(
                "{} {} and {} {}",
                a.words,
                social_clause(rng, a.person, frame),
                b.words,
                social_clause(rng, b.person, frame)
            )
        }
        _ => {
            let s = subject(rng);
            let v = PLACE_VERBS.choose(rng).unwrap();
            format!("{} {}", s.words, finite(v, s.person, frame))
        }
    };
    format!("{intro}, {body}.")
}

/// A short clean sentence with a pronoun subject: three to six words,
/// dense in verbs, pronouns and sentence boundaries.
pub fn terse_sentence(rng: &mut ChaCha8Rng) -> String {
    let (intro, frame) = *INTRO_PHRASES.choose(rng).unwrap();
    let intro = capitalize(&intro.join(" "));
    let s = pronoun_subject(rng);
    let body = match rng.random_range(0..3) {
        0 => {
            let v = PLACE_VERBS.choose(rng).unwrap();
            format!("{} {}", s.words, finite(v, s.person, frame))
        }
        1 => format!("{} {}", s.words, social_clause(rng, s.person, frame)),
        _ => {
            let (adj, _) = ADJECTIVES.choose(rng).unwrap();
            format!("{} {} {}", s.words, be(s.person, frame), adj)
        }
    };
    format!("{intro}, {body}.")
}

/// A clean paragraph of `sentences` sentences.
pub fn clean_paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    let parts: Vec<String> = (0..sentences).map(|_| clean_sentence(rng)).collect();
    parts.join(" ")
}

/// A clean paragraph of `sentences` terse sentences.
pub fn terse_paragraph(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    let parts: Vec<String> = (0..sentences).map(|_| terse_sentence(rng)).collect();
    parts.join(" ")
}

/// A clean text of exactly `words` words, by rejection sampling sentences.
pub fn clean_text_with_words(seed: u64, words: usize) -> Result<String> {
    if words < 3 {
        return Err(validation("need at least three words"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::new();
    let mut remaining = words;
    while remaining > 0 {
        let s = clean_sentence(&mut rng);
        let wc = crate::text::word_count(&s);
        if wc == remaining || wc + 3 <= remaining {
            remaining -= wc;
            out.push(s);
        }
    }
    Ok(out.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Probability that a sample is written in short sentences only.
    pub terse_fraction: f64,
    /// Each sample gets between `min_error_types` and `max_error_types`
    /// distinct error types.
    pub min_error_types: usize,
    pub max_error_types: usize,
    /// Upper bound of the total requested intensity per sample.
    pub max_budget: f64,
    /// Score lost per unit of total achieved intensity.
    pub penalty: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 1000,
            seed: 0,
            min_sentences: 3,
            max_sentences: 7,
            terse_fraction: 0.25,
            min_error_types: 0,
            max_error_types: 3,
            max_budget: 0.5,
            penalty: 8.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(validation("n_samples must be positive"));
        }
        if self.min_sentences == 0 || self.min_sentences > self.max_sentences {
            return Err(validation("need 1 <= min_sentences <= max_sentences"));
        }
        if self.min_error_types > self.max_error_types || self.max_error_types > ErrorType::COUNT {
            return Err(validation(
                "need min_error_types <= max_error_types <= number of error types",
            ));
        }
        if !(0.0..=1.0).contains(&self.terse_fraction) {
            return Err(validation("terse_fraction outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.max_budget) {
            return Err(validation("max_budget outside [0, 1]"));
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(validation("penalty must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSample {
    pub id: String,
    pub candidate_id: String,
    pub clean_text: String,
    pub text: String,
    pub true_score: f64,
    /// Achieved intensity per injected error type, in injection order.
    pub injected: Vec<(ErrorType, f64)>,
}

pub fn true_score(total_intensity: f64, penalty: f64) -> f64 {
    (MAX_SCORE - penalty * total_intensity).clamp(MIN_SCORE, MAX_SCORE)
}

/// Generates `config.n_samples` samples with ids `{prefix}-{i}` and one
/// candidate per sample (`{prefix}-c{i}`).
pub fn generate(config: &SynthConfig, prefix: &str) -> Result<Vec<SynthSample>> {
    config.validate()?;
    let lex = Lexicon::new();
    let mut out = Vec::with_capacity(config.n_samples);
    for i in 0..config.n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, i as u64, 0x7e47));
        let sentences = rng.random_range(config.min_sentences..=config.max_sentences);
        let clean = if rng.random_bool(config.terse_fraction) {
            terse_paragraph(&mut rng, sentences + 2)
        } else {
            clean_paragraph(&mut rng, sentences)
        };
        let k = rng.random_range(config.min_error_types..=config.max_error_types);
        let mut types = ErrorType::ALL.to_vec();
        types.shuffle(&mut rng);
        types.truncate(k);
        let budget = rng.random_range(0.0..=config.max_budget);
        let shares: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let share_sum: f64 = shares.iter().sum();

        let mut text = clean.clone();
        let mut injected = Vec::with_capacity(k);
        for (j, (ty, share)) in types.iter().zip(&shares).enumerate() {
            let spec = ErrorSpec::new(*ty, budget * share / share_sum, mix(config.seed, i as u64, j as u64))?;
            let res = inject_with(&lex, &text, &spec)?;
            injected.push((*ty, res.achieved_intensity));
            text = res.corrupted;
        }
        let total: f64 = injected.iter().map(|(_, a)| a).sum();
        out.push(SynthSample {
            id: format!("{prefix}-{i}"),
            candidate_id: format!("{prefix}-c{i}"),
            clean_text: clean,
            text,
            true_score: true_score(total, config.penalty),
            injected,
        });
    }
    Ok(out)
}

/// Replaces a `rate` fraction of `scores` (exactly `round(rate * n)` of
/// them) with uniform draws from [1, 5]. Returns the new scores and the
/// corruption mask.
pub fn corrupt_labels(scores: &[f64], rate: f64, seed: u64) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(validation(format!("corruption rate {rate} outside [0, 1]")));
    }
    let n = scores.len();
    let m = libm::round(rate * n as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut out = scores.to_vec();
    let mut mask = alloc::vec![false; n];
    for &i in &idx[..m] {
        out[i] = rng.random_range(MIN_SCORE..=MAX_SCORE);
        mask[i] = true;
    }
    Ok((out, mask))
}

/// Training dataset with the given pseudo-labels attached.
pub fn pseudo_labeled(samples: &[SynthSample], labels: &[f64], split: Split) -> Result<Dataset> {
    if samples.len() != labels.len() {
        return Err(validation("samples and labels differ in length"));
    }
    let records = samples
        .iter()
        .zip(labels)
        .map(|(s, &y)| {
            let prov = Provenance {
                model: String::from(TRUE_SCORE_MODEL),
                prompt_hash: String::new(),
            };
            Record::unrated(to_sample(s)?).with_pseudo(y, Some(prov))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records, split)
}

/// Dataset rated with the true scores as single expert ratings.
pub fn rated(samples: &[SynthSample], split: Split) -> Result<Dataset> {
    let records = samples
        .iter()
        .map(|s| Record::rated(to_sample(s)?, alloc::vec![s.true_score]))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records, split)
}

/// Unlabeled dataset, for pseudo-labeling.
pub fn unlabeled(samples: &[SynthSample], split: Split) -> Result<Dataset> {
    let records = samples
        .iter()
        .map(|s| Ok(Record::unrated(to_sample(s)?)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records, split)
}

fn to_sample(s: &SynthSample) -> Result<Sample> {
    Sample::new(s.id.clone(), s.candidate_id.clone(), s.text.clone(), Modality::Written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markers::detect;
    use crate::text::word_count;

    #[test]
    fn clean_sentences_trip_no_detector() {
        let lex = Lexicon::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            for p in [clean_paragraph(&mut rng, 4), terse_paragraph(&mut rng, 4)] {
                let c = detect(&lex, &p);
                assert_eq!(c.total(), 0, "{p:?}: {c:?}");
            }
        }
    }

    #[test]
    fn exact_word_counts() {
        let lex = Lexicon::new();
        for seed in 0..40 {
            for words in [3, 7, 20, 57, 100] {
                let t = clean_text_with_words(seed, words).unwrap();
                assert_eq!(word_count(&t), words, "{t:?}");
                assert_eq!(detect(&lex, &t).total(), 0, "{t:?}");
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            n_samples: 20,
            seed: 3,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg, "a").unwrap(), generate(&cfg, "a").unwrap());
    }

    #[test]
    fn true_scores_follow_intensity() {
        let cfg = SynthConfig {
            n_samples: 50,
            ..SynthConfig::default()
        };
        for s in generate(&cfg, "t").unwrap() {
            let total: f64 = s.injected.iter().map(|(_, a)| a).sum();
            assert_eq!(s.true_score, true_score(total, cfg.penalty));
            if s.injected.iter().all(|(_, a)| *a == 0.0) {
                assert_eq!(s.text, s.clean_text);
                assert_eq!(s.true_score, 5.0);
            }
        }
    }

    #[test]
    fn label_corruption_mask() {
        let scores = alloc::vec![3.0; 10];
        let (noisy, mask) = corrupt_labels(&scores, 0.4, 1).unwrap();
        assert_eq!(mask.iter().filter(|m| **m).count(), 4);
        for i in 0..10 {
            if !mask[i] {
                assert_eq!(noisy[i], 3.0);
            }
            assert!((1.0..=5.0).contains(&noisy[i]));
        }
    }
}

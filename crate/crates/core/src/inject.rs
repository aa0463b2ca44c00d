//! Seeded grammatical error injection with auditable edit logs.
//!
//! Intensity is the fraction of words affected. For a given `(text, seed,
//! error type)` the candidate sites are visited in one fixed seeded order,
//! and a request for `k` affected words takes the first sites of that order.
//! Corruptions at increasing intensity are therefore nested: everything
//! changed at 0.1 is also changed, identically, at 0.2.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{validation, Error, Result};
use crate::lexicon::{self, AuxTense, Lexicon, Person, Tag, VerbForm, AUX_FORMS, FILLERS, PREP_CONFUSIONS};
use crate::markers::{analyze, order_anomaly, WordInfo};
use crate::model::RegressionModel;
use crate::text::{self, split_parts, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    FillerWord,
    RedundantPhrase,
    WordOrder,
    VerbForm,
    Preposition,
    Tense,
    SubjectVerbAgreement,
    Spelling,
    Punctuation,
    Pronoun,
}

impl ErrorType {
    pub const COUNT: usize = 10;

    pub const ALL: [ErrorType; Self::COUNT] = [
        ErrorType::FillerWord,
        ErrorType::RedundantPhrase,
        ErrorType::WordOrder,
        ErrorType::VerbForm,
        ErrorType::Preposition,
        ErrorType::Tense,
        ErrorType::SubjectVerbAgreement,
        ErrorType::Spelling,
        ErrorType::Punctuation,
        ErrorType::Pronoun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::FillerWord => "filler_word",
            ErrorType::RedundantPhrase => "redundant_phrase",
            ErrorType::WordOrder => "word_order",
            ErrorType::VerbForm => "verb_form",
            ErrorType::Preposition => "preposition",
            ErrorType::Tense => "tense",
            ErrorType::SubjectVerbAgreement => "subject_verb_agreement",
            ErrorType::Spelling => "spelling",
            ErrorType::Punctuation => "punctuation",
            ErrorType::Pronoun => "pronoun",
        }
    }

    /// Insertion rules add words rather than rewrite them.
    pub fn is_insertion(self) -> bool {
        matches!(self, ErrorType::FillerWord | ErrorType::RedundantPhrase)
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| validation(format!("unknown error type {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub error_type: ErrorType,
    /// Fraction of words affected, in [0, 1].
    pub intensity: f64,
    pub seed: u64,
}

impl ErrorSpec {
    pub fn new(error_type: ErrorType, intensity: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&intensity) {
            return Err(validation(format!("intensity {intensity} outside [0, 1]")));
        }
        Ok(ErrorSpec {
            error_type,
            intensity,
            seed,
        })
    }
}

/// One token-level rewrite. `position` indexes the whitespace tokens of the
/// original text; `after` may contain spaces when words are inserted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub position: usize,
    pub rule_id: String,
    pub before: String,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionResult {
    pub original: String,
    pub corrupted: String,
    pub edits: Vec<Edit>,
    pub achieved_intensity: f64,
    pub affected_words: usize,
    pub requested_words: usize,
    /// Fewer words were affected than requested (not enough eligible sites).
    pub shortfall: bool,
}

/// Replays an edit log on `original`.
pub fn apply_edits(original: &str, edits: &[Edit]) -> Result<String> {
    let tokens = text::tokenize(original);
    let mut replacements = Vec::with_capacity(edits.len());
    let mut seen = BTreeMap::new();
    for e in edits {
        let tok = tokens
            .get(e.position)
            .ok_or_else(|| Error::EditMismatch(format!("position {} out of range", e.position)))?;
        if tok.text != e.before {
            return Err(Error::EditMismatch(format!(
                "token {} is {:?}, edit expects {:?}",
                e.position, tok.text, e.before
            )));
        }
        if seen.insert(e.position, ()).is_some() {
            return Err(Error::EditMismatch(format!("position {} edited twice", e.position)));
        }
        replacements.push((e.position, e.after.clone()));
    }
    Ok(text::replace_tokens(original, &tokens, &replacements))
}

/// Corrupts `text` according to `spec` using a fresh default lexicon.
pub fn inject(text: &str, spec: &ErrorSpec) -> Result<CorruptionResult> {
    inject_with(&Lexicon::new(), text, spec)
}

pub fn inject_with(lex: &Lexicon, text: &str, spec: &ErrorSpec) -> Result<CorruptionResult> {
    if !(0.0..=1.0).contains(&spec.intensity) {
        return Err(validation(format!("intensity {} outside [0, 1]", spec.intensity)));
    }
    let tokens = text::tokenize(text);
    let wc = tokens.len();
    if wc == 0 {
        return Err(validation("text has no words"));
    }
    let requested = libm::round(spec.intensity * wc as f64) as usize;
    let unchanged = |shortfall: bool| CorruptionResult {
        original: text.to_string(),
        corrupted: text.to_string(),
        edits: Vec::new(),
        achieved_intensity: 0.0,
        affected_words: 0,
        requested_words: requested,
        shortfall,
    };
    if requested == 0 {
        return Ok(unchanged(false));
    }

    let words = analyze(lex, &tokens);
    let ty = spec.error_type;
    let mut order = candidate_sites(ty, &words, &tokens);
    if order.is_empty() {
        return Ok(unchanged(true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, ty as u64, u64::MAX));
    order.shuffle(&mut rng);

    let mut used = alloc::vec![false; wc];
    let mut edits = Vec::new();
    let mut affected = 0;
    for site in order {
        let span = if ty == ErrorType::WordOrder { 2 } else { 1 };
        if affected + span > requested {
            break;
        }
        if (site..site + span).any(|i| used[i]) {
            continue;
        }
        let mut site_rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, ty as u64, site as u64));
        let new_edits = realize(lex, ty, &words, &tokens, site, &mut site_rng);
        if new_edits.is_empty() {
            continue;
        }
        for e in &new_edits {
            used[e.position] = true;
        }
        used[site] = true;
        affected += span;
        edits.extend(new_edits);
    }
    edits.sort_by_key(|e| e.position);
    let corrupted = apply_edits(text, &edits)?;
    Ok(CorruptionResult {
        original: text.to_string(),
        corrupted,
        edits,
        achieved_intensity: affected as f64 / wc as f64,
        affected_words: affected,
        requested_words: requested,
        shortfall: affected < requested,
    })
}

pub(crate) fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn is_present_aux(index: usize) -> bool {
    AUX_FORMS[index].2 == AuxTense::Present
}

/// Token indices where the rule can apply. For word order, the index of the
/// first word of the swapped pair; for redundant phrases, the anchor word
/// after which the phrase is repeated.
fn candidate_sites(ty: ErrorType, words: &[WordInfo<'_>], tokens: &[Token<'_>]) -> Vec<usize> {
    let n = words.len();
    let content: Vec<usize> = (0..n).filter(|&i| !words[i].filler).collect();
    match ty {
        ErrorType::FillerWord => (0..n).collect(),
        ErrorType::RedundantPhrase => {
            let mut sites = Vec::new();
            for (k, &i) in content.iter().enumerate() {
                let clause_start = words[i].sentence_initial
                    || (k > 0 && words[content[k - 1]].tag == Tag::Conj && !words[content[k - 1]].trailing_punct());
                if !clause_start || split_parts(tokens[i].text).core.is_empty() {
                    continue;
                }
                if words[i].trailing_punct() || content.get(k + 1) == Some(&(i + 1)) {
                    sites.push(i);
                }
            }
            sites
        }
        ErrorType::WordOrder => content
            .windows(2)
            .enumerate()
            .filter(|(k, w)| {
                let (a, b) = (w[0], w[1]);
                let before = k
                    .checked_sub(1)
                    .map(|p| &words[content[p]])
                    .filter(|x| !x.trailing_punct());
                let after = content.get(k + 2).map(|&c| &words[c]);
                let swapped_is_anomalous = before.is_some_and(|x| order_anomaly(x.tag, words[b].tag))
                    || order_anomaly(words[b].tag, words[a].tag)
                    || after.is_some_and(|y| order_anomaly(words[a].tag, y.tag));
                swapped_is_anomalous
                    && b == a + 1
                    && !words[a].sentence_initial
                    && !words[a].trailing_punct()
                    && !words[b].trailing_punct()
                    && !split_parts(tokens[a].text).core.is_empty()
                    && !split_parts(tokens[b].text).core.is_empty()
                    && words[a].norm != words[b].norm
            })
            .map(|(_, w)| w[0])
            .collect(),
        ErrorType::VerbForm => content
            .into_iter()
            .filter(|&i| matches!(words[i].tag, Tag::Verb { .. }))
            .collect(),
        ErrorType::Tense => content
            .into_iter()
            .filter(|&i| {
                let w = &words[i];
                w.finite
                    && match w.tag {
                        Tag::Verb { form, .. } => matches!(form, VerbForm::Base | VerbForm::Third | VerbForm::Past),
                        Tag::Aux { index } => AUX_FORMS[index].2 != AuxTense::Untensed,
                        _ => false,
                    }
            })
            .collect(),
        ErrorType::SubjectVerbAgreement => content
            .into_iter()
            .filter(|&i| {
                let w = &words[i];
                w.finite
                    && w.subject.is_some()
                    && match w.tag {
                        Tag::Verb { form, .. } => matches!(form, VerbForm::Base | VerbForm::Third),
                        Tag::Aux { index } => is_present_aux(index) || matches!(AUX_FORMS[index].0, "was" | "were"),
                        _ => false,
                    }
            })
            .collect(),
        ErrorType::Spelling => content
            .into_iter()
            .filter(|&i| {
                let core = split_parts(tokens[i].text).core;
                core.len() >= 3 && core.chars().all(|c| c.is_ascii_alphabetic())
            })
            .collect(),
        ErrorType::Punctuation => (0..n)
            .filter(|&i| {
                let suffix = split_parts(tokens[i].text).suffix;
                !split_parts(tokens[i].text).core.is_empty() && suffix.ends_with(['.', '!', '?', ','])
            })
            .collect(),
        ErrorType::Preposition => content.into_iter().filter(|&i| words[i].tag == Tag::Prep).collect(),
        ErrorType::Pronoun => content
            .into_iter()
            .filter(|&i| matches!(words[i].tag, Tag::SubjPron(_) | Tag::ObjPron))
            .collect(),
    }
}

/// Replaces the core of `token` and keeps its surrounding punctuation.
fn with_core(token: &str, new_core: &str) -> String {
    let p = split_parts(token);
    let core = text::match_case(p.core, new_core);
    format!("{}{}{}", p.prefix, core, p.suffix)
}

fn edit(position: usize, rule_id: &str, before: &str, after: String) -> Edit {
    Edit {
        position,
        rule_id: rule_id.to_string(),
        before: before.to_string(),
        after,
    }
}

fn realize(
    lex: &Lexicon,
    ty: ErrorType,
    words: &[WordInfo<'_>],
    tokens: &[Token<'_>],
    site: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Edit> {
    let tok = tokens[site].text;
    let w = &words[site];
    let single = |rule: &str, after: String| alloc::vec![edit(site, rule, tok, after)];
    match ty {
        ErrorType::FillerWord => {
            let filler = FILLERS[rng.random_range(0..FILLERS.len())];
            single("filler.insert", format!("{filler} {tok}"))
        }
        ErrorType::RedundantPhrase => {
            // phrase = clause-initial word plus the next one, unless the
            // first word already closes with punctuation
            let anchor = if w.trailing_punct() { site } else { site + 1 };
            let phrase: Vec<String> = (site..=anchor)
                .map(|i| {
                    let t = tokens[i].text;
                    if words[i].norm == "i" {
                        t.to_string()
                    } else {
                        t.to_lowercase()
                    }
                })
                .collect();
            let anchor_tok = tokens[anchor].text;
            alloc::vec![edit(
                anchor,
                "redundant.duplicate",
                anchor_tok,
                format!("{anchor_tok} {}", phrase.join(" ")),
            )]
        }
        ErrorType::WordOrder => {
            let next = tokens[site + 1].text;
            alloc::vec![
                edit(site, "word_order.swap", tok, next.to_string()),
                edit(site + 1, "word_order.swap", next, tok.to_string()),
            ]
        }
        ErrorType::VerbForm => {
            let Tag::Verb { verb, form } = w.tag else {
                return Vec::new();
            };
            let v = lex.verb(verb);
            let (rule, target) = match form {
                VerbForm::Past if v.participle != v.past => ("verb_form.participle", v.participle),
                VerbForm::Past | VerbForm::Base | VerbForm::Third => ("verb_form.ing", v.ing),
                VerbForm::Ing | VerbForm::Participle => ("verb_form.bare", v.base),
            };
            single(rule, with_core(tok, target))
        }
        ErrorType::Tense => {
            let target = match w.tag {
                Tag::Verb { verb, form } => match form {
                    VerbForm::Past => lex.present_for(verb, w.subject),
                    _ => lex.verb(verb).past,
                },
                Tag::Aux { index } => aux_tense_flip(AUX_FORMS[index].0, w.subject),
                _ => return Vec::new(),
            };
            single("tense.flip", with_core(tok, target))
        }
        ErrorType::SubjectVerbAgreement => {
            let target = match w.tag {
                Tag::Verb { verb, form } => match form {
                    VerbForm::Base => lex.verb(verb).third,
                    _ => lex.verb(verb).base,
                },
                Tag::Aux { index } => match AUX_FORMS[index].0 {
                    "am" | "are" => "is",
                    "is" => "are",
                    "was" => "were",
                    "were" => "was",
                    "has" => "have",
                    "have" => "has",
                    "does" => "do",
                    "do" => "does",
                    _ => return Vec::new(),
                },
                _ => return Vec::new(),
            };
            single("agreement.flip", with_core(tok, target))
        }
        ErrorType::Spelling => match misspell(lex, split_parts(tok).core, rng) {
            Some((rule, core)) => {
                let p = split_parts(tok);
                single(rule, format!("{}{}{}", p.prefix, core, p.suffix))
            }
            None => Vec::new(),
        },
        ErrorType::Punctuation => {
            let mut chars: Vec<char> = tok.chars().collect();
            let last = chars.pop().unwrap_or('.');
            let (rule, after) = if rng.random_bool(0.5) {
                ("punctuation.delete", chars.into_iter().collect::<String>())
            } else {
                let swapped = if last == ',' { '.' } else { ',' };
                let mut s: String = chars.into_iter().collect();
                s.push(swapped);
                ("punctuation.swap", s)
            };
            single(rule, after)
        }
        ErrorType::Preposition => {
            let prev_licensed = (0..site)
                .rev()
                .find(|&i| !words[i].filler)
                .filter(|&i| !words[i].trailing_punct())
                .and_then(|i| lex.licensed_preps(&words[i].norm))
                .unwrap_or(&[]);
            let options: Vec<&str> = PREP_CONFUSIONS
                .iter()
                .copied()
                .filter(|p| *p != w.norm && !prev_licensed.contains(p))
                .collect();
            if options.is_empty() {
                return Vec::new();
            }
            let target = options[rng.random_range(0..options.len())];
            single("preposition.substitute", with_core(tok, target))
        }
        ErrorType::Pronoun => {
            let Some(target) = lexicon::swap_case(&w.norm) else {
                return Vec::new();
            };
            let p = split_parts(tok);
            let core = lexicon::pronoun_surface(target, w.sentence_initial);
            single("pronoun.case", format!("{}{}{}", p.prefix, core, p.suffix))
        }
    }
}

fn aux_tense_flip(word: &str, subject: Option<Person>) -> &'static str {
    let third = subject == Some(Person::ThirdSingular);
    match word {
        "am" => "was",
        "is" => "was",
        "are" => "were",
        "was" => match subject {
            Some(Person::FirstSingular) => "am",
            _ => "is",
        },
        "were" => "are",
        "has" | "have" => "had",
        "had" => {
            if third {
                "has"
            } else {
                "have"
            }
        }
        "does" | "do" => "did",
        "did" => {
            if third {
                "does"
            } else {
                "do"
            }
        }
        _ => "is",
    }
}

/// Adjacent transposition or single-letter substitution that yields a
/// non-dictionary word.
fn misspell(lex: &Lexicon, core: &str, rng: &mut ChaCha8Rng) -> Option<(&'static str, String)> {
    let chars: Vec<char> = core.chars().collect();
    let n = chars.len();
    // A capital initial stays in place so the casing of the word survives.
    let lo = usize::from(chars[0].is_uppercase());
    for _ in 0..16 {
        let mut out = chars.clone();
        let rule = if rng.random_bool(0.5) {
            let j = rng.random_range(lo..n - 1);
            if out[j] == out[j + 1] {
                continue;
            }
            out.swap(j, j + 1);
            "spelling.transpose"
        } else {
            let j = rng.random_range(0..n);
            let letter = (b'a' + rng.random_range(0..26u8)) as char;
            let letter = if out[j].is_uppercase() {
                letter.to_ascii_uppercase()
            } else {
                letter
            };
            if letter == out[j] {
                continue;
            }
            out[j] = letter;
            "spelling.substitute"
        };
        let s: String = out.into_iter().collect();
        if !lex.is_known(&s.to_lowercase()) {
            return Some((rule, s));
        }
    }
    None
}

/// One corrupted copy of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRecord {
    pub sample_id: String,
    pub error_type: ErrorType,
    pub intensity: f64,
    pub original: String,
    pub corrupted: String,
    pub edits: Vec<Edit>,
    pub achieved_intensity: f64,
    #[serde(default)]
    pub shortfall: bool,
}

/// Corrupts every sample with `gold_score >= threshold` once per
/// `(type, intensity)` pair. Records are ordered by sample, type, intensity.
pub fn build_synthetic_suite(
    dataset: &Dataset,
    score_threshold: f64,
    intensities: &[f64],
    types: &[ErrorType],
    seed: u64,
) -> Result<Vec<SuiteRecord>> {
    if !(1.0..=5.0).contains(&score_threshold) {
        return Err(validation(format!("threshold {score_threshold} outside [1, 5]")));
    }
    for &x in intensities {
        if !(0.0..=1.0).contains(&x) {
            return Err(validation(format!("intensity {x} outside [0, 1]")));
        }
    }
    let lex = Lexicon::new();
    let mut out = Vec::new();
    let mut included = 0;
    for (idx, rec) in dataset.records.iter().enumerate() {
        let gold = rec
            .gold_score()
            .ok_or_else(|| validation(format!("sample {} has no gold score", rec.sample.id)))?;
        if gold < score_threshold {
            continue;
        }
        included += 1;
        for &ty in types {
            for &intensity in intensities {
                let spec = ErrorSpec {
                    error_type: ty,
                    intensity,
                    seed: mix(seed, idx as u64, 0x5eed),
                };
                let r = inject_with(&lex, &rec.sample.text, &spec)?;
                out.push(SuiteRecord {
                    sample_id: rec.sample.id.clone(),
                    error_type: ty,
                    intensity,
                    original: r.original,
                    corrupted: r.corrupted,
                    edits: r.edits,
                    achieved_intensity: r.achieved_intensity,
                    shortfall: r.shortfall,
                });
            }
        }
    }
    if included == 0 {
        return Err(validation(format!("no sample has gold score >= {score_threshold}")));
    }
    Ok(out)
}

/// One cell of the robustness table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub error_type: ErrorType,
    pub intensity: f64,
    pub mean_pred: f64,
    /// Mean of `predict(original) - predict(corrupted)`; positive is a drop.
    pub mean_drop: f64,
    pub pct_impacted: f64,
    pub n: usize,
}

/// Prediction shift table over a corruption suite. An intensity-0 baseline
/// row is added for every type that lacks one.
pub fn robustness_report<M: RegressionModel + ?Sized>(
    model: &M,
    suite: &[SuiteRecord],
    impact_threshold: f64,
) -> Result<Vec<RobustnessRow>> {
    if suite.is_empty() {
        return Err(validation("empty corruption suite"));
    }
    let mut originals: BTreeMap<&str, f64> = BTreeMap::new();
    let mut cells: BTreeMap<(ErrorType, u64), Vec<(f64, f64)>> = BTreeMap::new();
    let mut baseline: BTreeMap<ErrorType, BTreeMap<&str, f64>> = BTreeMap::new();
    for rec in suite {
        let orig = match originals.get(rec.original.as_str()) {
            Some(p) => *p,
            None => {
                let p = model.predict(&rec.original)?;
                originals.insert(&rec.original, p);
                p
            }
        };
        let corr = if rec.corrupted == rec.original {
            orig
        } else {
            model.predict(&rec.corrupted)?
        };
        cells
            .entry((rec.error_type, rec.intensity.to_bits()))
            .or_default()
            .push((orig, corr));
        baseline.entry(rec.error_type).or_default().insert(&rec.sample_id, orig);
    }

    let mut rows = Vec::new();
    for (ty, samples) in &baseline {
        let has_zero = cells.contains_key(&(*ty, 0f64.to_bits()));
        if !has_zero {
            let n = samples.len();
            let mean = samples.values().sum::<f64>() / n as f64;
            rows.push(RobustnessRow {
                error_type: *ty,
                intensity: 0.0,
                mean_pred: mean,
                mean_drop: 0.0,
                pct_impacted: 0.0,
                n,
            });
        }
        let mut keys: Vec<f64> = cells
            .keys()
            .filter(|(t, _)| t == ty)
            .map(|(_, bits)| f64::from_bits(*bits))
            .collect();
        keys.sort_by(f64::total_cmp);
        for intensity in keys {
            let pairs = &cells[&(*ty, intensity.to_bits())];
            let n = pairs.len() as f64;
            let mean_pred = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let mean_drop = pairs.iter().map(|p| p.0 - p.1).sum::<f64>() / n;
            let impacted = pairs
                .iter()
                .filter(|p| libm::fabs(p.1 - p.0) > impact_threshold)
                .count();
            rows.push(RobustnessRow {
                error_type: *ty,
                intensity,
                mean_pred,
                mean_drop,
                pct_impacted: 100.0 * impacted as f64 / n,
                n: pairs.len(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "Every day, she walks to the park and talks with them. \
        Yesterday, the teachers cooked the dinner for us. \
        Usually, I am happy about the news.";

    fn spec(ty: ErrorType, intensity: f64) -> ErrorSpec {
        ErrorSpec::new(ty, intensity, 7).unwrap()
    }

    #[test]
    fn zero_intensity_is_identity() {
        for ty in ErrorType::ALL {
            let r = inject(TEXT, &spec(ty, 0.0)).unwrap();
            assert_eq!(r.corrupted, TEXT);
            assert!(r.edits.is_empty());
            assert!(!r.shortfall);
        }
    }

    #[test]
    fn every_rule_changes_text_and_replays() {
        for ty in ErrorType::ALL {
            let r = inject(TEXT, &spec(ty, 0.1)).unwrap();
            assert!(!r.edits.is_empty(), "{ty}");
            assert_ne!(r.corrupted, TEXT, "{ty}");
            assert_eq!(apply_edits(TEXT, &r.edits).unwrap(), r.corrupted);
        }
    }

    #[test]
    fn tense_rule_on_verbless_fragment_flags_shortfall() {
        let r = inject("the big red park", &spec(ErrorType::Tense, 0.5)).unwrap();
        assert_eq!(r.corrupted, "the big red park");
        assert_eq!(r.achieved_intensity, 0.0);
        assert!(r.shortfall);
    }

    #[test]
    fn pronoun_rule_keeps_capital_i() {
        let r = inject("Usually, I am happy about the news.", &spec(ErrorType::Pronoun, 0.5)).unwrap();
        assert_eq!(r.corrupted, "Usually, me am happy about the news.");
    }

    #[test]
    fn word_order_counts_two_words_per_swap() {
        let r = inject(TEXT, &spec(ErrorType::WordOrder, 0.2)).unwrap();
        assert_eq!(r.edits.len(), r.affected_words);
        assert_eq!(r.affected_words % 2, 0);
    }

    #[test]
    fn edit_mismatch_is_reported() {
        let bad = [Edit {
            position: 0,
            rule_id: "x".into(),
            before: "Nope".into(),
            after: "y".into(),
        }];
        assert!(matches!(apply_edits(TEXT, &bad), Err(Error::EditMismatch(_))));
    }

    #[test]
    fn error_type_names_round_trip() {
        for ty in ErrorType::ALL {
            assert_eq!(ty.name().parse::<ErrorType>().unwrap(), ty);
        }
        assert!("grammar".parse::<ErrorType>().is_err());
    }

    #[test]
    fn out_of_range_intensity_rejected() {
        assert!(ErrorSpec::new(ErrorType::Spelling, 1.5, 0).is_err());
    }
}

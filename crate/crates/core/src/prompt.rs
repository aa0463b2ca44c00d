//! Rubric prompts, score parsing and the LLM client contract.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{in_score_range, Sample, MAX_SCORE};
use crate::error::{validation, Error, Result};
use crate::lexicon::Lexicon;
use crate::markers;

pub const RESPONSE_BEGIN: &str = "<<<RESPONSE>>>";
pub const RESPONSE_END: &str = "<<<END RESPONSE>>>";
pub const SCORE_INSTRUCTION: &str = "Reply with a single integer score from 1 to 5 and nothing else.";

/// Default public five-point grammar rubric. Replace it with your own rubric
/// file for real studies; the prompt hash changes with it.
pub const DEFAULT_RUBRIC: &str = "\
5 - Excellent: grammar is accurate throughout; sentence structures are varied and well formed; \
errors, if any, are rare slips that never affect meaning.
4 - Good: a few minor errors (articles, prepositions, agreement) that do not impede understanding; \
mostly well-formed sentences.
3 - Fair: noticeable errors in verb forms, tense or agreement; some awkward word order; \
meaning is generally clear but requires some effort.
2 - Limited: frequent errors across several categories; fragments or run-ons are common; \
meaning is sometimes obscured.
1 - Poor: pervasive errors make the response very hard to follow; little control of basic structures.";

pub const DEFAULT_TEMPLATE: &str = "\
You are an expert rater of English grammar competency.

Scoring rubric:
{rubric}

Rate the grammatical accuracy, coherence and fluency of the candidate response below.
{response}
";

/// A grammar rubric and the template it is rendered into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricPrompt {
    pub rubric_text: String,
    /// Contains `{response}` exactly once and `{rubric}` at most once.
    pub template: String,
    pub prompt_hash: String,
}

impl Default for RubricPrompt {
    fn default() -> Self {
        RubricPrompt::new(DEFAULT_RUBRIC, DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

impl RubricPrompt {
    pub fn new(rubric_text: impl Into<String>, template: impl Into<String>) -> Result<Self> {
        let rubric_text = rubric_text.into();
        let template = template.into();
        if template.matches("{response}").count() != 1 {
            return Err(validation("template must contain {response} exactly once"));
        }
        if template.matches("{rubric}").count() > 1 {
            return Err(validation("template may contain {rubric} at most once"));
        }
        let prompt_hash = content_hash(&rubric_text, &template);
        Ok(RubricPrompt {
            rubric_text,
            template,
            prompt_hash,
        })
    }

    pub fn with_rubric(rubric_text: impl Into<String>) -> Result<Self> {
        Self::new(rubric_text, DEFAULT_TEMPLATE)
    }
}

fn content_hash(rubric: &str, template: &str) -> String {
    let mut h = Sha256::new();
    h.update(rubric.as_bytes());
    h.update([0u8]);
    h.update(template.as_bytes());
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Escapes every `<<<` (with any backslashes directly before it) so that the
/// delimiters cannot occur unescaped. Text without `<<<` is returned as-is.
pub fn escape_delimiters(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut last = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' || bytes[i] == b'<' {
            let run_start = i;
            while i < bytes.len() && bytes[i] == b'\\' {
                i += 1;
            }
            if text[i..].starts_with("<<<") {
                out.push_str(&text[last..run_start]);
                for _ in 0..(2 * (i - run_start) + 1) {
                    out.push('\\');
                }
                out.push_str("<<<");
                i += 3;
                last = i;
            } else if i == run_start {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Inverse of [`escape_delimiters`].
pub fn unescape_delimiters(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut last = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            let run_start = i;
            while i < bytes.len() && bytes[i] == b'\\' {
                i += 1;
            }
            let run = i - run_start;
            if text[i..].starts_with("<<<") && run % 2 == 1 {
                out.push_str(&text[last..run_start]);
                for _ in 0..run / 2 {
                    out.push('\\');
                }
                out.push_str("<<<");
                i += 3;
                last = i;
            }
        } else {
            i += 1;
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Renders the scoring prompt for one sample.
pub fn build_prompt(rubric: &RubricPrompt, sample: &Sample) -> String {
    render(rubric, &sample.text)
}

pub fn render(rubric: &RubricPrompt, response: &str) -> String {
    let block = format!("{RESPONSE_BEGIN}\n{}\n{RESPONSE_END}", escape_delimiters(response));
    let rubric_text = escape_delimiters(&rubric.rubric_text);
    let mut out = String::with_capacity(rubric.template.len() + block.len() + rubric_text.len() + 80);
    if !rubric.template.contains("{rubric}") {
        out.push_str(&rubric_text);
        out.push_str("\n\n");
    }
    // single pass so placeholder-like text inside the inputs is left alone
    let mut rest = rubric.template.as_str();
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{response}") {
            out.push_str(&block);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{rubric}") {
            out.push_str(&rubric_text);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out.push('\n');
    out.push_str(SCORE_INSTRUCTION);
    out
}

/// Recovers the response text embedded by [`build_prompt`].
pub fn extract_response(prompt: &str) -> Option<String> {
    let begin = find_unescaped(prompt, RESPONSE_BEGIN, 0)?;
    let start = begin + RESPONSE_BEGIN.len() + 1;
    let end = find_unescaped(prompt, RESPONSE_END, start)?;
    if end == 0 || start > end - 1 {
        return None;
    }
    Some(unescape_delimiters(&prompt[start..end - 1]))
}

fn find_unescaped(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let mut offset = from;
    while let Some(pos) = haystack.get(offset..)?.find(needle) {
        let at = offset + pos;
        let backslashes = haystack[..at].bytes().rev().take_while(|&b| b == b'\\').count();
        if backslashes % 2 == 0 {
            return Some(at);
        }
        offset = at + 1;
    }
    None
}

/// Reads the first number in a model response as a score in [1, 5].
pub fn parse_score(raw: &str) -> Result<f64> {
    let bytes = raw.as_bytes();
    let start = bytes.iter().position(u8::is_ascii_digit).ok_or(Error::ParseFailure)?;
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit() {
        end += 1;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
    }
    let negative = start > 0 && bytes[start - 1] == b'-';
    let value: f64 = raw[start..end].parse().map_err(|_| Error::ParseFailure)?;
    let value = if negative { -value } else { value };
    if !in_score_range(value) {
        return Err(Error::OutOfRange(value));
    }
    Ok(value)
}

/// A language model that completes a prompt.
///
/// Implementations must be safe to retry: sending the same prompt twice is
/// always allowed.
pub trait LlmClient {
    fn model_name(&self) -> &str;

    fn complete(&self, prompt: &str) -> Result<String>;
}

impl<C: LlmClient + ?Sized> LlmClient for &C {
    fn model_name(&self) -> &str {
        (**self).model_name()
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub sample_id: String,
    pub score: f64,
    pub model_name: String,
    pub prompt_hash: String,
    pub raw_response: String,
}

/// A sample that could not be labeled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: String,
    pub reason: String,
    pub attempts: usize,
}

/// Queries `client` up to `attempts` times until a response parses.
pub fn label_sample<C: LlmClient + ?Sized>(
    client: &C,
    rubric: &RubricPrompt,
    sample: &Sample,
    attempts: usize,
) -> core::result::Result<PseudoLabel, Rejection> {
    let prompt = build_prompt(rubric, sample);
    let mut reason = String::from("no attempts made");
    for attempt in 1..=attempts {
        match client.complete(&prompt) {
            Ok(raw) => match parse_score(&raw) {
                Ok(score) => {
                    return Ok(PseudoLabel {
                        sample_id: sample.id.clone(),
                        score,
                        model_name: client.model_name().to_string(),
                        prompt_hash: rubric.prompt_hash.clone(),
                        raw_response: raw,
                    })
                }
                Err(e) => reason = format!("attempt {attempt}: {e}"),
            },
            Err(e) => reason = format!("attempt {attempt}: {e}"),
        }
    }
    Err(Rejection {
        sample_id: sample.id.clone(),
        reason,
        attempts,
    })
}

/// Sensitivity of the mock scorer to total error-marker density.
pub const MOCK_DENSITY_SCALE: f64 = 2.5;

/// Offline, deterministic stand-in for an LLM scorer.
///
/// The score of a response is `5 - 4 * (1 - exp(-2.5 * d))` where `d` is the
/// total error-marker density found by [`markers::detect`]: 5.0 for clean text,
/// saturating towards 1.0 as markers accumulate. With probability
/// `corruption_rate` (decided by a hash of the prompt and `noise_seed`) the
/// score is replaced by a uniform draw from {1, 2, 3, 4, 5}.
#[derive(Debug, Clone)]
pub struct MockClient {
    noise_seed: u64,
    corruption_rate: f64,
    lexicon: Lexicon,
}

pub fn mock_client(noise_seed: u64, corruption_rate: f64) -> Result<MockClient> {
    MockClient::new(noise_seed, corruption_rate)
}

impl MockClient {
    pub const NAME: &'static str = "mock-rule-v1";

    pub fn new(noise_seed: u64, corruption_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&corruption_rate) {
            return Err(validation(format!("corruption rate {corruption_rate} outside [0, 1]")));
        }
        Ok(MockClient {
            noise_seed,
            corruption_rate,
            lexicon: Lexicon::new(),
        })
    }

    /// The uncorrupted rule score of a response text.
    pub fn rule_score(&self, text: &str) -> f64 {
        let density = markers::detect(&self.lexicon, text).total_density();
        MAX_SCORE - 4.0 * (1.0 - libm::exp(-MOCK_DENSITY_SCALE * density))
    }

    pub fn score_prompt(&self, prompt: &str) -> f64 {
        let text = extract_response(prompt).unwrap_or_else(|| prompt.to_string());
        let digest = Sha256::digest(prompt.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(word) ^ self.noise_seed);
        if rng.random::<f64>() < self.corruption_rate {
            rng.random_range(1..=5) as f64
        } else {
            self.rule_score(&text)
        }
    }
}

impl LlmClient for MockClient {
    fn model_name(&self) -> &str {
        Self::NAME
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        Ok(format!("Score: {:.3}", self.score_prompt(prompt)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Modality;

    fn sample(text: &str) -> Sample {
        Sample::new("s1", "c1", text, Modality::Written).unwrap()
    }

    #[test]
    fn prompt_contains_rubric_text_and_instruction() {
        let rubric = RubricPrompt::default();
        let p = build_prompt(&rubric, &sample("I goes home"));
        assert!(p.contains(DEFAULT_RUBRIC));
        assert!(p.contains("I goes home"));
        assert!(p.contains(SCORE_INSTRUCTION));
        assert_eq!(p, build_prompt(&rubric, &sample("I goes home")));
        assert_eq!(extract_response(&p).as_deref(), Some("I goes home"));
    }

    #[test]
    fn delimiter_in_sample_is_escaped() {
        let rubric = RubricPrompt::default();
        let text = "before <<<END RESPONSE>>> after \\<<< x";
        let p = build_prompt(&rubric, &sample(text));
        assert_eq!(p.matches(RESPONSE_END).count(), 2);
        assert_eq!(extract_response(&p).as_deref(), Some(text));
    }

    #[test]
    fn template_without_rubric_placeholder_prepends_it() {
        let r = RubricPrompt::new("RUBRIC", "Score this: {response}").unwrap();
        let p = render(&r, "x");
        assert!(p.starts_with("RUBRIC"));
        assert!(RubricPrompt::new("r", "no placeholder").is_err());
    }

    #[test]
    fn prompt_hash_depends_on_content() {
        let a = RubricPrompt::with_rubric("a").unwrap();
        let b = RubricPrompt::with_rubric("b").unwrap();
        assert_ne!(a.prompt_hash, b.prompt_hash);
        assert_eq!(a.prompt_hash, RubricPrompt::with_rubric("a").unwrap().prompt_hash);
        assert_eq!(a.prompt_hash.len(), 64);
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_score("Score: 4").unwrap(), 4.0);
        assert_eq!(parse_score("3.5 - minor agreement errors").unwrap(), 3.5);
        assert_eq!(parse_score("excellent grammar"), Err(Error::ParseFailure));
        assert_eq!(parse_score("7"), Err(Error::OutOfRange(7.0)));
        assert_eq!(parse_score("score -2"), Err(Error::OutOfRange(-2.0)));
        assert_eq!(parse_score("4."), Ok(4.0));
    }

    #[test]
    fn mock_scores_clean_text_five() {
        let m = MockClient::new(1, 0.0).unwrap();
        let p = render(&RubricPrompt::default(), "Every day, she walks to the park.");
        assert_eq!(parse_score(&m.complete(&p).unwrap()).unwrap(), 5.0);
        assert!(MockClient::new(1, 1.5).is_err());
    }

    #[test]
    fn mock_penalizes_errors() {
        let m = MockClient::new(1, 0.0).unwrap();
        let clean = m.rule_score("Every day, she walks to the park.");
        let noisy = m.rule_score("Every day, her walking at the prak");
        assert!(noisy < clean);
        assert!(noisy >= 1.0);
    }

    struct Garbage;
    impl LlmClient for Garbage {
        fn model_name(&self) -> &str {
            "garbage"
        }
        fn complete(&self, _: &str) -> Result<String> {
            Ok("no idea".into())
        }
    }

    #[test]
    fn exhausted_retries_reject() {
        let r = label_sample(&Garbage, &RubricPrompt::default(), &sample("x y"), 3).unwrap_err();
        assert_eq!(r.attempts, 3);
        assert!(r.reason.contains("no numeric score"));
    }
}

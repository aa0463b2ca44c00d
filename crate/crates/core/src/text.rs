//! Whitespace tokenization with punctuation kept on tokens.
//!
//! A "word" is a maximal run of non-whitespace characters. Everything that
//! counts words (intensity accounting, featurization) goes through here so
//! the definition stays in one place.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

/// One whitespace-delimited token and its byte span in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub span: (usize, usize),
}

/// Splits `text` into whitespace-delimited tokens, recording byte spans.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &text[s..i],
                    span: (s, i),
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &text[s..],
            span: (s, text.len()),
        });
    }
    out
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// A token split into leading punctuation, alphabetic-ish core and trailing
/// punctuation, e.g. `"(home)."` becomes `("(", "home", ").")`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parts<'a> {
    pub prefix: &'a str,
    pub core: &'a str,
    pub suffix: &'a str,
}

pub fn split_parts(token: &str) -> Parts<'_> {
    let start = token.char_indices().find(|&(_, c)| c.is_alphanumeric()).map(|(i, _)| i);
    let Some(start) = start else {
        return Parts {
            prefix: token,
            core: "",
            suffix: "",
        };
    };
    let mut end = token.len();
    for (i, c) in token.char_indices().rev() {
        if c.is_alphanumeric() {
            end = i + c.len_utf8();
            break;
        }
    }
    Parts {
        prefix: &token[..start],
        core: &token[start..end],
        suffix: &token[end..],
    }
}

/// Lowercased core of a token.
pub fn normalize(token: &str) -> String {
    split_parts(token).core.to_lowercase()
}

pub fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

/// Re-applies the capitalization of `model` to `word` (first letter only).
pub fn match_case(model: &str, word: &str) -> String {
    if is_capitalized(model) {
        capitalize(word)
    } else {
        String::from(word)
    }
}

pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => {
            let mut s: String = first.to_uppercase().collect();
            s.push_str(chars.as_str());
            s
        }
        None => String::new(),
    }
}

pub fn ends_sentence(token: &str) -> bool {
    token.ends_with(['.', '!', '?'])
}

pub fn has_trailing_punct(token: &str) -> bool {
    !split_parts(token).suffix.is_empty()
}

/// Rebuilds text from `source` with the tokens at the given indices replaced.
/// Whitespace between tokens is preserved byte-for-byte.
pub fn replace_tokens(source: &str, tokens: &[Token<'_>], replacements: &[(usize, String)]) -> String {
    let mut out = String::with_capacity(source.len() + 16);
    let mut cursor = 0;
    let mut sorted: Vec<&(usize, String)> = replacements.iter().collect();
    sorted.sort_by_key(|(i, _)| *i);
    for (idx, new) in sorted {
        let Range { start, end } = span_range(&tokens[*idx]);
        out.push_str(&source[cursor..start]);
        out.push_str(new);
        cursor = end;
    }
    out.push_str(&source[cursor..]);
    out
}

fn span_range(tok: &Token<'_>) -> Range<usize> {
    tok.span.0..tok.span.1
}

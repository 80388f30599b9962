//! Tokenization, masking and answer-string normalization.
//!
//! The tokenizer splits on whitespace and peels punctuation off both ends of
//! every whitespace chunk. Only word tokens are features; punctuation tokens
//! are kept for offset fidelity but never counted and never emitted by
//! [`apply_mask`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single token of a source string. Offsets are byte offsets into the
/// source, so `&raw[start..end] == text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub is_word: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedText {
    pub raw: String,
    pub tokens: Vec<Token>,
}

impl TokenizedText {
    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_word).count()
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word)
    }

    pub fn word_texts(&self) -> Vec<&str> {
        self.words().map(|t| t.text.as_str()).collect()
    }
}

/// Which question words survive a perturbation. One flag per word token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mask(Vec<bool>);

impl Mask {
    /// Builds a mask, rejecting the empty selection.
    pub fn new(keep: Vec<bool>) -> Result<Self> {
        if !keep.iter().any(|&k| k) {
            return Err(Error::Contract(
                "mask must keep at least one word".to_string(),
            ));
        }
        Ok(Mask(keep))
    }

    pub fn all(n_words: usize) -> Self {
        Mask(vec![true; n_words])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.0.iter().filter(|&&k| k).count()
    }

    pub fn keeps(&self, word: usize) -> bool {
        self.0[word]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn kept_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &k)| k)
            .map(|(i, _)| i)
    }

    /// Returns a copy with `word` cleared. Fails if that would empty the mask.
    pub fn without(&self, word: usize) -> Result<Self> {
        let mut keep = self.0.clone();
        keep[word] = false;
        Mask::new(keep)
    }

    /// True when every kept word of `self` is also kept by `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }
}

impl std::fmt::Display for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &k in &self.0 {
            f.write_str(if k { "1" } else { "0" })?;
        }
        Ok(())
    }
}

pub(crate) fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

pub fn tokenize(text: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    let mut chunk_start: Option<usize> = None;
    for (i, c) in text
        .char_indices()
        .chain(std::iter::once((text.len(), ' ')))
    {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                push_chunk(text, s, i, &mut tokens);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    TokenizedText {
        raw: text.to_string(),
        tokens,
    }
}

fn push_chunk(source: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let chunk = &source[start..end];
    let punct = |s: usize, c: char| Token {
        text: c.to_string(),
        start: s,
        end: s + c.len_utf8(),
        is_word: false,
    };

    let Some(word_lo) = chunk
        .char_indices()
        .find(|(_, c)| !is_punct(*c))
        .map(|(i, _)| i)
    else {
        out.extend(chunk.char_indices().map(|(i, c)| punct(start + i, c)));
        return;
    };
    let word_hi = chunk
        .char_indices()
        .rev()
        .find(|(_, c)| !is_punct(*c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(chunk.len());

    out.extend(
        chunk[..word_lo]
            .char_indices()
            .map(|(i, c)| punct(start + i, c)),
    );
    out.push(Token {
        text: chunk[word_lo..word_hi].to_string(),
        start: start + word_lo,
        end: start + word_hi,
        is_word: true,
    });
    out.extend(
        chunk[word_hi..]
            .char_indices()
            .map(|(i, c)| punct(start + word_hi + i, c)),
    );
}

/// Renders the reduced question: kept words in order, single-space joined.
pub fn apply_mask(question: &TokenizedText, mask: &Mask) -> Result<String> {
    let n = question.word_count();
    if mask.len() != n {
        return Err(Error::Contract(format!(
            "mask has {} entries but question has {} words",
            mask.len(),
            n
        )));
    }
    if mask.kept() == 0 {
        return Err(Error::Contract("mask keeps no words".to_string()));
    }
    let kept: Vec<&str> = question
        .words()
        .zip(mask.as_slice())
        .filter(|(_, &k)| k)
        .map(|(t, _)| t.text.as_str())
        .collect();
    Ok(kept.join(" "))
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercases, strips punctuation, drops articles and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|&c| !is_punct(c))
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalized words of `text`, in order.
pub fn normalized_words(text: &str) -> Vec<String> {
    normalize(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Converts a character (code point) offset into a byte offset of `text`.
/// Returns `None` past the end.
pub fn char_to_byte(text: &str, char_offset: usize) -> Option<usize> {
    if char_offset == text.chars().count() {
        return Some(text.len());
    }
    text.char_indices().nth(char_offset).map(|(b, _)| b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CANYON_QUESTION: &str = "What type of rock is found at the Grand Canyon?";

    #[test]
    fn tokenizes_table_question() {
        let t = tokenize(CANYON_QUESTION);
        assert_eq!(
            t.word_texts(),
            vec!["What", "type", "of", "rock", "is", "found", "at", "the", "Grand", "Canyon"]
        );
        let punct: Vec<_> = t.tokens.iter().filter(|t| !t.is_word).collect();
        assert_eq!(punct.len(), 1);
        assert_eq!(punct[0].text, "?");
        assert_eq!(t.word_count(), 10);
    }

    #[test]
    fn empty_and_single_word() {
        assert!(tokenize("").tokens.is_empty());
        assert!(tokenize("   \t ").tokens.is_empty());
        let t = tokenize("who?");
        assert_eq!(t.tokens.len(), 2);
        assert_eq!(
            (t.tokens[0].text.as_str(), t.tokens[0].is_word),
            ("who", true)
        );
        assert_eq!(
            (t.tokens[1].text.as_str(), t.tokens[1].is_word),
            ("?", false)
        );
    }

    #[test]
    fn punctuation_only_chunks_and_inner_punctuation() {
        let t = tokenize("\"U.S.\" ... don't");
        let texts: Vec<_> = t
            .tokens
            .iter()
            .map(|t| (t.text.as_str(), t.is_word))
            .collect();
        assert_eq!(
            texts,
            vec![
                ("\"", false),
                ("U.S", true),
                (".", false),
                ("\"", false),
                (".", false),
                (".", false),
                (".", false),
                ("don't", true)
            ]
        );
    }

    #[test]
    fn mask_renders_reduced_questions() {
        let q = tokenize(CANYON_QUESTION);
        let keep = |idx: &[usize]| Mask::new((0..10).map(|i| idx.contains(&i)).collect()).unwrap();
        assert_eq!(
            apply_mask(&q, &keep(&[1, 2, 3, 8, 9])).unwrap(),
            "type of rock Grand Canyon"
        );
        assert_eq!(apply_mask(&q, &keep(&[1])).unwrap(), "type");
        assert_eq!(
            apply_mask(&q, &Mask::all(10)).unwrap(),
            "What type of rock is found at the Grand Canyon"
        );
    }

    #[test]
    fn mask_length_mismatch_is_rejected() {
        let q = tokenize(CANYON_QUESTION);
        assert!(matches!(
            apply_mask(&q, &Mask::all(3)),
            Err(Error::Contract(_))
        ));
        assert!(Mask::new(vec![false, false]).is_err());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize("Sedimentary."), "sedimentary");
        assert_eq!(normalize("The Grand Canyon"), "grand canyon");
        assert_eq!(
            normalize("impediments and difficulties"),
            "impediments and difficulties"
        );
        assert_eq!(normalize("  A  theory,  of an   apple "), "theory of apple");
    }

    #[test]
    fn char_offsets_map_to_bytes() {
        let s = "naïve rock";
        assert_eq!(char_to_byte(s, 0), Some(0));
        assert_eq!(char_to_byte(s, 6), Some(7));
        assert_eq!(char_to_byte(s, 10), Some(s.len()));
        assert_eq!(char_to_byte(s, 11), None);
    }

    proptest! {
        #[test]
        fn offsets_slice_back_to_token_text(s in "[a-zA-Z0-9 ,.?!'\"é\\-]{0,60}") {
            let t = tokenize(&s);
            let mut last_end = 0;
            for tok in &t.tokens {
                prop_assert!(tok.start < tok.end);
                prop_assert!(tok.start >= last_end);
                prop_assert_eq!(&s[tok.start..tok.end], tok.text.as_str());
                // only whitespace between tokens
                prop_assert!(s[last_end..tok.start].chars().all(char::is_whitespace));
                last_end = tok.end;
            }
            prop_assert!(s[last_end..].chars().all(char::is_whitespace));
        }

        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn masked_word_count_equals_popcount(
            words in proptest::collection::vec("[a-z]{1,6}", 1..12),
            bits in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let q = tokenize(&format!("{}?", words.join(" ")));
            let mut keep: Vec<bool> = bits[..words.len()].to_vec();
            keep[0] = true;
            let mask = Mask::new(keep).unwrap();
            let out = apply_mask(&q, &mask).unwrap();
            prop_assert_eq!(out.split(' ').count(), mask.kept());
            let full = apply_mask(&q, &Mask::all(words.len())).unwrap();
            prop_assert_eq!(full, words.join(" "));
        }
    }
}

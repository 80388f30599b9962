use std::collections::HashSet;

use super::{argmax, context_words, AnswerPrediction, Answerer};
use crate::error::ModelError;
use crate::text;

/// Width of the sliding answer window, in context words.
pub const BASELINE_WINDOW: usize = 15;

pub(crate) const STOPWORDS: &[&str] = &[
    "i",
    "me",
    "my",
    "myself",
    "we",
    "our",
    "ours",
    "ourselves",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "it",
    "its",
    "itself",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "what",
    "which",
    "who",
    "whom",
    "this",
    "that",
    "these",
    "those",
    "am",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "have",
    "has",
    "had",
    "having",
    "do",
    "does",
    "did",
    "doing",
    "a",
    "an",
    "the",
    "and",
    "but",
    "if",
    "or",
    "because",
    "as",
    "until",
    "while",
    "of",
    "at",
    "by",
    "for",
    "with",
    "about",
    "against",
    "between",
    "into",
    "through",
    "during",
    "before",
    "after",
    "above",
    "below",
    "to",
    "from",
    "up",
    "down",
    "in",
    "out",
    "on",
    "off",
    "over",
    "under",
    "again",
    "further",
    "then",
    "once",
    "here",
    "there",
    "when",
    "where",
    "why",
    "how",
    "all",
    "any",
    "both",
    "each",
    "few",
    "more",
    "most",
    "other",
    "some",
    "such",
    "no",
    "nor",
    "not",
    "only",
    "own",
    "same",
    "so",
    "than",
    "too",
    "very",
    "s",
    "t",
    "can",
    "will",
    "just",
    "don",
    "should",
    "now",
];

pub(crate) fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Deterministic lexical-overlap reader.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineAnswerer;

impl Answerer for BaselineAnswerer {
    fn predict(&self, question: &str, context: &str) -> Result<AnswerPrediction, ModelError> {
        baseline_predict(question, context)
    }
}

/// Scores every window start by how many content words of the question fall
/// inside the window, softmaxes the scores into a start distribution and
/// answers with the best window.
pub fn baseline_predict(question: &str, context: &str) -> Result<AnswerPrediction, ModelError> {
    let tokens = context_words(context);
    if tokens.is_empty() {
        return Err(ModelError::InvalidInput("context has no words".into()));
    }
    let normalized: Vec<String> = tokens.iter().map(|t| text::normalize(t)).collect();
    let query: Vec<String> = text::tokenize(question)
        .words()
        .map(|t| text::normalize(&t.text))
        .filter(|w| !w.is_empty() && !is_stopword(w))
        .collect();

    let n = tokens.len();
    let scores: Vec<f64> = (0..n)
        .map(|start| {
            let window: HashSet<&str> = normalized[start..(start + BASELINE_WINDOW).min(n)]
                .iter()
                .map(String::as_str)
                .collect();
            query.iter().filter(|w| window.contains(w.as_str())).count() as f64
        })
        .collect();

    let distribution = softmax(&scores);
    let start = argmax(&scores);
    let end = (start + BASELINE_WINDOW).min(n) - 1;
    Ok(AnswerPrediction::from_span(
        tokens,
        distribution,
        start,
        end,
    ))
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capital_of_france() {
        // Windows starting at 0..=3 all contain both "capital" and "France"
        // (score 2); starts 4 and 5 only contain "France" (score 1).
        let p = baseline_predict("capital France", "Paris is the capital of France .").unwrap();
        assert_eq!(p.context_tokens.len(), 6);
        assert_eq!(p.start_token, 0);
        assert_eq!(p.end_token, 5);
        assert_eq!(p.answer_text, "Paris is the capital of France");
        let e = std::f64::consts::E;
        let z = 4.0 * e * e + 2.0 * e;
        for i in 0..4 {
            assert!((p.start_distribution[i] - e * e / z).abs() < 1e-12);
        }
        for i in 4..6 {
            assert!((p.start_distribution[i] - e / z).abs() < 1e-12);
        }
    }

    #[test]
    fn long_context_window_is_bounded() {
        let ctx: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let p = baseline_predict("w30", &ctx.join(" ")).unwrap();
        // windows starting at 16..=30 contain w30; the first of them wins
        assert_eq!(p.start_token, 16);
        assert_eq!(p.end_token, 30);
    }

    #[test]
    fn zero_overlap_is_uniform() {
        let p = baseline_predict("zebra", "one two three four").unwrap();
        assert!(p
            .start_distribution
            .iter()
            .all(|&x| (x - 0.25).abs() < 1e-15));
        assert_eq!(p.start_token, 0);
    }

    #[test]
    fn stopword_only_question_is_uniform() {
        let p = baseline_predict("what is the", "what is the answer").unwrap();
        assert!(p
            .start_distribution
            .iter()
            .all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_word_context() {
        let p = baseline_predict("anything", "Sedimentary.").unwrap();
        assert_eq!(p.start_distribution, vec![1.0]);
        assert_eq!(p.answer_text, "Sedimentary");
        assert_eq!((p.start_token, p.end_token), (0, 0));
    }
}

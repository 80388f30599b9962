//! Per-example pipeline: ask the full question, pick the answer-start class,
//! fit the surrogate, then reduce.

use serde::{Deserialize, Serialize};

use crate::dataset::QaExample;
use crate::error::{Error, Result};
use crate::models::{locate_target_class, AnswerPrediction, AnswererHandle, PredictionCache};
use crate::reducer::{reduce_cached, ReduceOptions, ReductionTrace};
use crate::surrogate::{example_seed, explain_cached, Explanation, SurrogateConfig};
use crate::text;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Base config; the seed is mixed with the example id per example.
    pub surrogate: SurrogateConfig,
    pub reduce: ReduceOptions,
}

/// Resolves the ground-truth class in the model's own context tokenization.
///
/// When the model tokenizes the context into the same words as
/// [`text::tokenize`], character offsets are used directly. Otherwise the
/// first answer word is looked up among the model's tokens, taking the same
/// occurrence (by count) as the offset points at.
pub fn resolve_target(prediction: &AnswerPrediction, example: &QaExample) -> Result<usize> {
    let context = text::tokenize(&example.context);
    let aligned = context
        .words()
        .map(|t| t.text.as_str())
        .eq(prediction.context_tokens.iter().map(String::as_str));
    let mut last_err = None;
    for answer in &example.answers {
        let found = locate_target_class(&context, &answer.text, answer.answer_start);
        let found = match found {
            Ok(i) if aligned => Ok(i),
            Ok(i) => realign(&context.word_texts(), i, &prediction.context_tokens),
            Err(e) => Err(e),
        };
        match found {
            Ok(i) => return Ok(i),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::TargetNotFound(format!("{} has no answers", example.id))))
}

fn realign(ours: &[&str], index: usize, theirs: &[String]) -> Result<usize> {
    let word = text::normalize(ours[index]);
    let ordinal = ours[..index]
        .iter()
        .filter(|w| text::normalize(w) == word)
        .count();
    let hits: Vec<usize> = theirs
        .iter()
        .enumerate()
        .filter(|(_, t)| text::normalize(t) == word)
        .map(|(i, _)| i)
        .collect();
    hits.get(ordinal).or(hits.first()).copied().ok_or_else(|| {
        Error::TargetNotFound(format!("{word:?} is not among the model's context tokens"))
    })
}

/// Explanation for the ground-truth class of one example.
pub fn explain_example(
    example: &QaExample,
    handle: &AnswererHandle,
    config: &SurrogateConfig,
) -> Result<Explanation> {
    let mut cache = PredictionCache::new(handle, &example.context);
    explain_with_cache(example, &mut cache, config)
}

fn explain_with_cache(
    example: &QaExample,
    cache: &mut PredictionCache<'_>,
    config: &SurrogateConfig,
) -> Result<Explanation> {
    let question = text::tokenize(&example.question);
    if question.word_count() == 0 {
        return Err(Error::Contract(format!(
            "question of {} has no words",
            example.id
        )));
    }
    let full = cache.predict(&example.question)?.clone();
    let target = resolve_target(&full, example)?;
    let seeded = config.with_seed(example_seed(config.seed, &example.id));
    explain_cached(&question, cache, target, &seeded)
}

/// Explains and reduces one example, sharing model answers between the two.
pub fn analyze_example(
    example: &QaExample,
    handle: &AnswererHandle,
    options: &AnalysisOptions,
) -> Result<ReductionTrace> {
    let mut cache = PredictionCache::new(handle, &example.context);
    let explanation = explain_with_cache(example, &mut cache, &options.surrogate)?;
    reduce_cached(example, &explanation, &mut cache, options.reduce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Answer;
    use crate::models::KeywordOracle;

    fn example() -> QaExample {
        let context = "Some rock is old. The canyon rock is sedimentary.".to_string();
        let at = context.find("sedimentary").unwrap();
        QaExample {
            id: "x".into(),
            question: "What type of rock?".into(),
            context,
            answers: vec![Answer {
                text: "sedimentary".into(),
                answer_start: Some(at),
            }],
        }
    }

    #[test]
    fn aligned_target_uses_offsets() {
        let ex = example();
        let p = crate::models::baseline_predict(&ex.question, &ex.context).unwrap();
        assert_eq!(resolve_target(&p, &ex).unwrap(), 8);
    }

    #[test]
    fn misaligned_tokens_are_matched_by_occurrence() {
        let mut ex = example();
        ex.answers[0].text = "rock".into();
        ex.answers[0].answer_start = Some(ex.context.rfind("rock").unwrap());
        let theirs: Vec<String> = [
            "[CLS]",
            "some",
            "rock",
            "is",
            "old.",
            "the",
            "canyon",
            "rock",
            "is",
            "sedimentary.",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let n = theirs.len();
        let p = AnswerPrediction::from_span(theirs, vec![1.0 / n as f64; n], 0, 0);
        assert_eq!(resolve_target(&p, &ex).unwrap(), 7);
    }

    #[test]
    fn second_answer_is_tried() {
        let mut ex = example();
        ex.answers.insert(
            0,
            Answer {
                text: "granite".into(),
                answer_start: None,
            },
        );
        let p = crate::models::baseline_predict(&ex.question, &ex.context).unwrap();
        assert_eq!(resolve_target(&p, &ex).unwrap(), 8);
    }

    #[test]
    fn analysis_is_deterministic_and_seeded_per_example() {
        let ex = example();
        let handle = AnswererHandle::keyword_oracle(KeywordOracle::new("type", 8).unwrap());
        let opts = AnalysisOptions {
            surrogate: SurrogateConfig {
                n_samples: 300,
                seed: 7,
                ..Default::default()
            },
            ..Default::default()
        };
        let a = analyze_example(&ex, &handle, &opts).unwrap();
        let b = analyze_example(&ex, &handle, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.explanation.config.seed, example_seed(7, "x"));
        assert_eq!(a.root().unwrap().words, vec!["type"]);
    }
}

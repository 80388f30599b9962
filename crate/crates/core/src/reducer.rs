//! Iterative question reduction driven by surrogate coefficients.
//!
//! Words are dropped one at a time, least important first, until a single
//! word is left. Every intermediate question is asked again and checked
//! against the ground truth; the shortest matched question is the root.

use serde::{Deserialize, Serialize};

use crate::dataset::QaExample;
use crate::error::{Error, Result};
use crate::models::{answer_matches, AnswerPrediction, AnswererHandle, PredictionCache};
use crate::surrogate::{Explanation, Perturbations};
use crate::text::{self, Mask, TokenizedText};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub mask: Mask,
    pub reduced_question: String,
    pub prediction: AnswerPrediction,
    pub matched: bool,
    pub word_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub example_id: String,
    pub question: String,
    pub explanation: Explanation,
    /// Word indices in the order they were removed.
    pub removal_order: Vec<usize>,
    pub steps: Vec<ReductionStep>,
    pub root_step_index: usize,
}

impl ReductionTrace {
    pub fn n_words(&self) -> usize {
        self.explanation.n_words
    }

    pub fn root(&self) -> Result<RootQuestion> {
        find_root(self)
    }

    pub fn matched_word_counts(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.matched)
            .map(|s| s.word_count)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootQuestion {
    pub words: Vec<String>,
    pub word_count: usize,
    pub n_original: usize,
    pub percent_removed: f64,
}

impl RootQuestion {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReduceOptions {
    /// Re-fit the surrogate on the surviving words before every removal
    /// instead of freezing the order from the full question.
    pub recompute_coefficients: bool,
}

/// Ascending coefficient, ties by original position.
pub fn removal_order(explanation: &Explanation) -> Vec<usize> {
    let mut order: Vec<usize> = (0..explanation.coefficients.len()).collect();
    order.sort_by(|&a, &b| {
        explanation.coefficients[a]
            .total_cmp(&explanation.coefficients[b])
            .then(a.cmp(&b))
    });
    order
}

pub fn reduce(
    example: &QaExample,
    explanation: &Explanation,
    handle: &AnswererHandle,
) -> Result<ReductionTrace> {
    let mut cache = PredictionCache::new(handle, &example.context);
    reduce_cached(example, explanation, &mut cache, ReduceOptions::default())
}

pub fn reduce_cached(
    example: &QaExample,
    explanation: &Explanation,
    cache: &mut PredictionCache<'_>,
    options: ReduceOptions,
) -> Result<ReductionTrace> {
    let question = text::tokenize(&example.question);
    let n = question.word_count();
    if n == 0 || explanation.n_words != n || explanation.coefficients.len() != n {
        return Err(Error::Contract(format!(
            "explanation covers {} words, question {:?} has {n}",
            explanation.n_words, example.id
        )));
    }
    let truths = example.ground_truths();

    let mut steps: Vec<ReductionStep> = Vec::with_capacity(n);
    let mut removed = Vec::with_capacity(n.saturating_sub(1));
    let mut mask = Mask::all(n);
    let frozen = removal_order(explanation);

    loop {
        let reduced_question = text::apply_mask(&question, &mask)?;
        let prediction = match cache.predict(&reduced_question) {
            Ok(p) => p.clone(),
            Err(source) => {
                return Err(Error::PartialTrace {
                    example_id: example.id.clone(),
                    completed: steps,
                    source,
                })
            }
        };
        let matched = answer_matches(&prediction, &truths);
        let word_count = mask.kept();
        steps.push(ReductionStep {
            mask: mask.clone(),
            reduced_question,
            prediction,
            matched,
            word_count,
        });
        if word_count == 1 {
            break;
        }

        let next = if options.recompute_coefficients && steps.len() > 1 {
            weakest_surviving(&question, &mask, explanation, cache, steps.len()).map_err(|e| {
                match e {
                    Error::Sample { source, .. } => Error::PartialTrace {
                        example_id: example.id.clone(),
                        completed: steps.clone(),
                        source,
                    },
                    other => other,
                }
            })?
        } else {
            frozen[removed.len()]
        };
        removed.push(next);
        mask = mask.without(next)?;
    }

    let root_step_index = steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.matched)
        .min_by_key(|(_, s)| s.word_count)
        .map(|(i, _)| i)
        .ok_or_else(|| {
            Error::Contract(format!(
                "no reduced form of {:?} matches its ground truth",
                example.id
            ))
        })?;

    Ok(ReductionTrace {
        example_id: example.id.clone(),
        question: example.question.clone(),
        explanation: explanation.clone(),
        removal_order: removed,
        steps,
        root_step_index,
    })
}

/// Re-explains the currently kept words and returns the original index of the
/// lowest-ranked one.
fn weakest_surviving(
    question: &TokenizedText,
    mask: &Mask,
    explanation: &Explanation,
    cache: &mut PredictionCache<'_>,
    step: usize,
) -> Result<usize> {
    let kept: Vec<usize> = mask.kept_indices().collect();
    let sub = text::tokenize(&text::apply_mask(question, mask)?);
    let config = explanation
        .config
        .with_seed(explanation.config.seed.wrapping_add(step as u64));
    let local =
        Perturbations::collect(&sub, cache, &config)?.explain_class(explanation.target_class)?;
    Ok(kept[removal_order(&local)[0]])
}

/// Shortest matched step of the trace, wherever it sits.
pub fn find_root(trace: &ReductionTrace) -> Result<RootQuestion> {
    let step = trace
        .steps
        .iter()
        .filter(|s| s.matched)
        .min_by_key(|s| s.word_count)
        .ok_or_else(|| {
            Error::Contract(format!("trace {} has no matched step", trace.example_id))
        })?;
    let n = trace.n_words();
    Ok(RootQuestion {
        words: step
            .mask
            .kept_indices()
            .map(|i| trace.explanation.words[i].clone())
            .collect(),
        word_count: step.word_count,
        n_original: n,
        percent_removed: (n - step.word_count) as f64 / n as f64,
    })
}

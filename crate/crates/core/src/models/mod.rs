//! The answerer contract, the built-in answerers and the answer-match rule.

use std::fmt;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, ModelError, Result};
use crate::text::{self, TokenizedText};

pub(crate) mod baseline;
mod cache;
mod oracle;
mod remote;
mod scripted;
pub mod stub;

pub use baseline::{baseline_predict, BaselineAnswerer, BASELINE_WINDOW};
pub use cache::PredictionCache;
pub use oracle::{KeywordOracle, ORACLE_MASS};
pub use remote::{RemoteAnswerer, PROBE_CONTEXT, PROBE_QUESTION};
pub use scripted::{Script, ScriptRule, ScriptedAnswerer};

/// Allowed drift of a start distribution's total mass.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// One answer from a QA model: the predicted span plus the distribution over
/// answer-start positions in the model's own context tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerPrediction {
    pub answer_text: String,
    pub start_token: usize,
    /// Inclusive.
    pub end_token: usize,
    pub context_tokens: Vec<String>,
    pub start_distribution: Vec<f64>,
}

impl AnswerPrediction {
    /// Builds a prediction whose answer text is the joined span.
    pub fn from_span(
        context_tokens: Vec<String>,
        start_distribution: Vec<f64>,
        start_token: usize,
        end_token: usize,
    ) -> Self {
        let answer_text = context_tokens
            .get(start_token..=end_token)
            .map(|s| s.join(" "))
            .unwrap_or_default();
        AnswerPrediction {
            answer_text,
            start_token,
            end_token,
            context_tokens,
            start_distribution,
        }
    }

    /// Checks the structural invariants; the error names the failed check.
    pub fn validate(&self) -> std::result::Result<(), ModelError> {
        let n = self.context_tokens.len();
        if n == 0 {
            return Err(ModelError::Protocol {
                check: "context_tokens",
                detail: "no context tokens".into(),
            });
        }
        if self.start_distribution.len() != n {
            return Err(ModelError::Protocol {
                check: "length",
                detail: format!(
                    "start_distribution has {} entries, context_tokens has {}",
                    self.start_distribution.len(),
                    n
                ),
            });
        }
        if let Some((i, p)) = self
            .start_distribution
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ModelError::Protocol {
                check: "probability",
                detail: format!("start_distribution[{i}] = {p}"),
            });
        }
        let total: f64 = self.start_distribution.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(ModelError::Protocol {
                check: "sum",
                detail: format!("start_distribution sums to {total}"),
            });
        }
        if self.start_token > self.end_token || self.end_token >= n {
            return Err(ModelError::Protocol {
                check: "index",
                detail: format!(
                    "span [{}, {}] outside 0..{}",
                    self.start_token, self.end_token, n
                ),
            });
        }
        Ok(())
    }

    pub fn prob(&self, class: usize) -> Option<f64> {
        self.start_distribution.get(class).copied()
    }
}

/// Smallest index among the maxima.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Word tokens of `context`, the class space of the built-in answerers.
pub(crate) fn context_words(context: &str) -> Vec<String> {
    text::tokenize(context)
        .words()
        .map(|t| t.text.clone())
        .collect()
}

/// Anything that can answer a question about a context.
pub trait Answerer: Send + Sync {
    fn predict(
        &self,
        question: &str,
        context: &str,
    ) -> std::result::Result<AnswerPrediction, ModelError>;

    /// Liveness check; local answerers are always healthy.
    fn health(&self) -> std::result::Result<(), ModelError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswererKind {
    BuiltinBaseline,
    KeywordOracle,
    Scripted,
    Remote,
    /// A library user's own [`Answerer`].
    Custom,
}

impl fmt::Display for AnswererKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnswererKind::BuiltinBaseline => "builtin-baseline",
            AnswererKind::KeywordOracle => "keyword-oracle",
            AnswererKind::Scripted => "scripted",
            AnswererKind::Remote => "remote",
            AnswererKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Counting gate that caps the number of concurrent calls into an answerer.
struct InflightGate {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InflightGate {
    fn enter(&self) -> GatePass<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        GatePass(self)
    }
}

struct GatePass<'a>(&'a InflightGate);

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable handle to an answerer. Cloning is cheap; all clones share the
/// same in-flight limit.
#[derive(Clone)]
pub struct AnswererHandle {
    kind: AnswererKind,
    max_inflight: usize,
    inner: Arc<dyn Answerer>,
    gate: Arc<InflightGate>,
}

impl fmt::Debug for AnswererHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnswererHandle")
            .field("kind", &self.kind)
            .field("max_inflight", &self.max_inflight)
            .finish()
    }
}

impl AnswererHandle {
    pub fn new(
        kind: AnswererKind,
        max_inflight: usize,
        answerer: impl Answerer + 'static,
    ) -> Result<Self> {
        if max_inflight == 0 {
            return Err(Error::Config("max_inflight must be at least 1".into()));
        }
        Ok(AnswererHandle {
            kind,
            max_inflight,
            inner: Arc::new(answerer),
            gate: Arc::new(InflightGate {
                limit: max_inflight,
                active: Mutex::new(0),
                freed: Condvar::new(),
            }),
        })
    }

    fn unbounded(kind: AnswererKind, answerer: impl Answerer + 'static) -> Self {
        Self::new(kind, usize::MAX, answerer).expect("nonzero limit")
    }

    pub fn builtin() -> Self {
        Self::unbounded(AnswererKind::BuiltinBaseline, BaselineAnswerer)
    }

    pub fn keyword_oracle(oracle: KeywordOracle) -> Self {
        Self::unbounded(AnswererKind::KeywordOracle, oracle)
    }

    pub fn scripted(script: Script) -> Self {
        Self::unbounded(AnswererKind::Scripted, ScriptedAnswerer::new(script))
    }

    pub fn remote(base_url: &str, max_inflight: usize) -> Result<Self> {
        Self::new(
            AnswererKind::Remote,
            max_inflight,
            RemoteAnswerer::new(base_url),
        )
    }

    pub fn custom(answerer: impl Answerer + 'static) -> Self {
        Self::unbounded(AnswererKind::Custom, answerer)
    }

    /// Parses a model spec: `builtin`, `oracle:<keyword>:<target>`,
    /// `scripted:<path>` or `http:<url>`.
    pub fn from_spec(spec: &str, remote_inflight: usize) -> Result<Self> {
        let (scheme, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match scheme {
            "builtin" if rest.is_empty() => Ok(Self::builtin()),
            "oracle" => {
                let (keyword, target) = rest.rsplit_once(':').ok_or_else(|| {
                    Error::Config(format!("expected oracle:<keyword>:<target>, got {spec:?}"))
                })?;
                let target: usize = target
                    .parse()
                    .map_err(|_| Error::Config(format!("bad oracle target {target:?}")))?;
                Ok(Self::keyword_oracle(KeywordOracle::new(keyword, target)?))
            }
            "scripted" if !rest.is_empty() => Ok(Self::scripted(Script::load(rest)?)),
            "http" | "https" if !rest.is_empty() => {
                let url = if rest.starts_with("//") {
                    spec.to_string()
                } else {
                    rest.to_string()
                };
                Self::remote(&url, remote_inflight)
            }
            _ => Err(Error::Config(format!("unrecognized model spec {spec:?}"))),
        }
    }

    pub fn kind(&self) -> AnswererKind {
        self.kind
    }

    pub fn max_inflight(&self) -> usize {
        self.max_inflight
    }

    pub fn health(&self) -> std::result::Result<(), ModelError> {
        self.inner.health()
    }

    /// Queries the answerer and validates the result.
    pub fn predict(
        &self,
        question: &str,
        context: &str,
    ) -> std::result::Result<AnswerPrediction, ModelError> {
        if question.trim().is_empty() {
            return Err(ModelError::InvalidInput("empty question".into()));
        }
        if context.trim().is_empty() {
            return Err(ModelError::InvalidInput("empty context".into()));
        }
        let prediction = {
            let _pass = self.gate.enter();
            self.inner.predict(question, context)?
        };
        prediction.validate()?;
        Ok(prediction)
    }
}

/// True when some normalized ground-truth word appears in the normalized
/// answer. Ground truths that normalize to nothing are skipped.
pub fn answer_matches<S: AsRef<str>>(prediction: &AnswerPrediction, ground_truths: &[S]) -> bool {
    let answer_words = text::normalized_words(&prediction.answer_text);
    let mut usable = 0;
    for truth in ground_truths {
        let truth_words = text::normalized_words(truth.as_ref());
        if truth_words.is_empty() {
            continue;
        }
        usable += 1;
        if truth_words.iter().any(|w| answer_words.contains(w)) {
            return true;
        }
    }
    if usable == 0 {
        log::warn!("every ground truth normalizes to an empty string; counting as no match");
    }
    false
}

/// Index (among word tokens) of the context word where the answer starts.
pub fn locate_target_class(
    context: &TokenizedText,
    answer_text: &str,
    answer_start_char: Option<usize>,
) -> Result<usize> {
    if answer_text.trim().is_empty() {
        return Err(Error::Contract("answer text is empty".into()));
    }
    match answer_start_char {
        Some(offset) => {
            let byte = text::char_to_byte(&context.raw, offset).ok_or_else(|| {
                Error::TargetNotFound(format!("answer offset {offset} is past the context end"))
            })?;
            // An answer may open with punctuation (quotes, brackets); fall
            // through to the first word that begins inside the answer.
            let answer_end = byte + answer_text.len();
            context
                .words()
                .position(|t| t.start <= byte && byte < t.end)
                .or_else(|| {
                    context
                        .words()
                        .position(|t| t.start >= byte && t.start < answer_end)
                })
                .ok_or_else(|| {
                    Error::TargetNotFound(format!("no word token at character {offset}"))
                })
        }
        None => {
            let first = text::normalized_words(answer_text)
                .into_iter()
                .next()
                .ok_or_else(|| {
                    Error::TargetNotFound(format!("answer {answer_text:?} has no words"))
                })?;
            context
                .words()
                .position(|t| text::normalize(&t.text) == first)
                .ok_or_else(|| {
                    Error::TargetNotFound(format!("{first:?} does not occur in the context"))
                })
        }
    }
}

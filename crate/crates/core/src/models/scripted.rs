use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{context_words, AnswerPrediction, Answerer};
use crate::error::{Error, ModelError, Result};
use crate::text;

/// A replayable answering script.
///
/// ```json
/// {
///   "rules": [{"contains": ["type"], "answer": "sedimentary"}],
///   "fallback": null,
///   "confidence": 0.9
/// }
/// ```
///
/// The first rule whose `contains` words are all present in the question and
/// whose `absent` words are all missing decides the answer. The answer text is
/// located in the context by normalized word match and receives `confidence`
/// of the start mass; the rest is spread uniformly. With no rule firing the
/// `fallback` answer is used, or a uniform distribution pointing at the first
/// context word when there is no fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub fallback: Option<String>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    #[serde(default)]
    pub contains: Vec<String>,
    #[serde(default)]
    pub absent: Vec<String>,
    pub answer: String,
}

impl Script {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: Script = serde_json::from_str(&raw).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&script.confidence) {
            return Err(Error::Config(format!(
                "script confidence {} outside [0, 1]",
                script.confidence
            )));
        }
        Ok(script)
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAnswerer {
    script: Script,
}

impl ScriptedAnswerer {
    pub fn new(script: Script) -> Self {
        ScriptedAnswerer { script }
    }

    fn choose(&self, question: &str) -> Option<&str> {
        let words: Vec<String> = text::tokenize(question)
            .words()
            .map(|t| text::normalize(&t.text))
            .collect();
        let has = |w: &String| words.contains(&text::normalize(w));
        self.script
            .rules
            .iter()
            .find(|r| r.contains.iter().all(has) && !r.absent.iter().any(has))
            .map(|r| r.answer.as_str())
            .or(self.script.fallback.as_deref())
    }
}

fn find_span(tokens: &[String], answer: &str) -> Option<(usize, usize)> {
    let needle = text::normalized_words(answer);
    if needle.is_empty() {
        return None;
    }
    let hay: Vec<String> = tokens.iter().map(|t| text::normalize(t)).collect();
    hay.windows(needle.len())
        .position(|w| w == needle.as_slice())
        .map(|i| (i, i + needle.len() - 1))
}

impl Answerer for ScriptedAnswerer {
    fn predict(
        &self,
        question: &str,
        context: &str,
    ) -> std::result::Result<AnswerPrediction, ModelError> {
        let tokens = context_words(context);
        let n = tokens.len();
        if n == 0 {
            return Err(ModelError::InvalidInput("context has no words".into()));
        }
        let Some(answer) = self.choose(question) else {
            return Ok(AnswerPrediction::from_span(
                tokens,
                vec![1.0 / n as f64; n],
                0,
                0,
            ));
        };
        let (start, end) = find_span(&tokens, answer).ok_or_else(|| {
            ModelError::Config(format!(
                "scripted answer {answer:?} does not occur in the context"
            ))
        })?;
        let distribution = if n == 1 {
            vec![1.0]
        } else {
            let conf = self.script.confidence;
            let rest = (1.0 - conf) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == start { conf } else { rest })
                .collect()
        };
        Ok(AnswerPrediction::from_span(
            tokens,
            distribution,
            start,
            end,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONTEXT: &str =
        "Most of the Grand Canyon walls are sedimentary rock, laid down in ancient seas.";

    fn table_script() -> Script {
        serde_json::from_str(r#"{"rules": [{"contains": ["type"], "answer": "sedimentary"}]}"#)
            .unwrap()
    }

    #[test]
    fn replays_the_rule() {
        let s = ScriptedAnswerer::new(table_script());
        let p = s.predict("type", CONTEXT).unwrap();
        assert_eq!(p.answer_text, "sedimentary");
        assert_eq!(p.start_distribution[p.start_token], 0.9);
        let q = s.predict("What of rock", CONTEXT).unwrap();
        assert_eq!(q.answer_text, "Most");
    }

    #[test]
    fn absent_words_and_fallback() {
        let script = Script {
            rules: vec![ScriptRule {
                contains: vec!["rock".into()],
                absent: vec!["walls".into()],
                answer: "ancient seas".into(),
            }],
            fallback: Some("Grand Canyon".into()),
            confidence: 0.5,
        };
        let s = ScriptedAnswerer::new(script);
        assert_eq!(
            s.predict("rock?", CONTEXT).unwrap().answer_text,
            "ancient seas"
        );
        assert_eq!(
            s.predict("rock walls", CONTEXT).unwrap().answer_text,
            "Grand Canyon"
        );
    }

    #[test]
    fn missing_answer_is_an_error() {
        let script = Script {
            rules: vec![],
            fallback: Some("basalt".into()),
            confidence: 0.9,
        };
        assert!(ScriptedAnswerer::new(script).predict("x", CONTEXT).is_err());
    }

    #[test]
    fn load_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        std::fs::write(&p, r#"{"rules": [], "confidence": 2.0}"#).unwrap();
        assert!(matches!(Script::load(&p), Err(Error::Config(_))));
        std::fs::write(&p, r#"{"rules": [], "bogus": 1}"#).unwrap();
        assert!(matches!(Script::load(&p), Err(Error::Parse { .. })));
        assert!(matches!(
            Script::load(dir.path().join("nope")),
            Err(Error::Io { .. })
        ));
    }
}

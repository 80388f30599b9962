//! SQuAD v1.1 ingestion and the correct-answer filter.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, ModelError, Result};
use crate::models::{answer_matches, AnswererHandle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Character offset of the answer in the context, when known and valid.
    pub answer_start: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub id: String,
    pub question: String,
    pub context: String,
    pub answers: Vec<Answer>,
}

impl QaExample {
    pub fn ground_truths(&self) -> Vec<&str> {
        self.answers.iter().map(|a| a.text.as_str()).collect()
    }
}

/// Something odd in an input file that did not stop the load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub examples: Vec<QaExample>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn load_squad(path: impl AsRef<Path>) -> Result<Vec<QaExample>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let loaded = parse_squad(&raw)?;
    for d in &loaded.diagnostics {
        log::warn!("{}: {}: {}", path.display(), d.path, d.message);
    }
    Ok(loaded.examples)
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| parse_err(format!("{at}.{key}"), "missing field"))
}

fn as_object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| parse_err(at, "expected an object"))
}

fn as_array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| parse_err(at, "expected an array"))
}

fn as_str<'a>(v: &'a Value, at: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| parse_err(at, "expected a string"))
}

/// Walks `data → paragraphs → qas`, one example per qa entry, in file order.
pub fn parse_squad(raw: &str) -> Result<LoadedDataset> {
    let root: Value = serde_json::from_str(raw).map_err(|e| parse_err("$", e.to_string()))?;
    let root = as_object(&root, "$")?;
    if let Some(extra) = root.keys().find(|k| *k != "data" && *k != "version") {
        return Err(parse_err(
            format!("$.{extra}"),
            "unexpected top-level field",
        ));
    }
    let data = as_array(field(root, "data", "$")?, "$.data")?;

    let mut out = LoadedDataset::default();
    for (ai, article) in data.iter().enumerate() {
        let at = format!("$.data[{ai}]");
        let article = as_object(article, &at)?;
        let paragraphs = as_array(
            field(article, "paragraphs", &at)?,
            &format!("{at}.paragraphs"),
        )?;
        for (pi, paragraph) in paragraphs.iter().enumerate() {
            let at = format!("{at}.paragraphs[{pi}]");
            let paragraph = as_object(paragraph, &at)?;
            let context = as_str(field(paragraph, "context", &at)?, &format!("{at}.context"))?;
            let qas = as_array(field(paragraph, "qas", &at)?, &format!("{at}.qas"))?;
            for (qi, qa) in qas.iter().enumerate() {
                let at = format!("{at}.qas[{qi}]");
                out.examples
                    .push(parse_qa(qa, context, &at, &mut out.diagnostics)?);
            }
        }
    }
    Ok(out)
}

fn parse_qa(qa: &Value, context: &str, at: &str, diags: &mut Vec<Diagnostic>) -> Result<QaExample> {
    let qa = as_object(qa, at)?;
    if qa.get("is_impossible").and_then(Value::as_bool) == Some(true) {
        return Err(parse_err(
            format!("{at}.is_impossible"),
            "unanswerable (SQuAD 2.0) questions are not supported",
        ));
    }
    let id = match field(qa, "id", at)? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(parse_err(format!("{at}.id"), "expected a string")),
    };
    let question = as_str(field(qa, "question", at)?, &format!("{at}.question"))?.to_string();
    let answers_at = format!("{at}.answers");
    let raw_answers = as_array(field(qa, "answers", at)?, &answers_at)?;
    if raw_answers.is_empty() {
        return Err(parse_err(answers_at, "no answers"));
    }

    let mut answers = Vec::with_capacity(raw_answers.len());
    for (i, a) in raw_answers.iter().enumerate() {
        let at = format!("{answers_at}[{i}]");
        let a = as_object(a, &at)?;
        let text = as_str(field(a, "text", &at)?, &format!("{at}.text"))?.to_string();
        let answer_start = match a.get("answer_start") {
            None | Some(Value::Null) => None,
            Some(v) => match v.as_u64() {
                Some(start) if offset_is_valid(context, start as usize, &text) => {
                    Some(start as usize)
                }
                _ => {
                    diags.push(Diagnostic {
                        path: format!("{at}.answer_start"),
                        message: format!("offset {v} does not point at {text:?}; dropped"),
                    });
                    None
                }
            },
        };
        answers.push(Answer { text, answer_start });
    }
    Ok(QaExample {
        id,
        question,
        context: context.to_string(),
        answers,
    })
}

fn offset_is_valid(context: &str, start: usize, text: &str) -> bool {
    crate::text::char_to_byte(context, start)
        .map(|b| context[b..].starts_with(text))
        .unwrap_or(false)
}

/// Writes examples back out in SQuAD v1.1 shape, grouping consecutive
/// examples that share a context into one paragraph.
pub fn to_squad_json(examples: &[QaExample]) -> Value {
    let mut paragraphs: Vec<Value> = Vec::new();
    let mut current: Option<(&str, Vec<Value>)> = None;
    for ex in examples {
        let qa = json!({
            "id": ex.id,
            "question": ex.question,
            "answers": ex.answers.iter().map(|a| match a.answer_start {
                Some(s) => json!({"text": a.text, "answer_start": s}),
                None => json!({"text": a.text}),
            }).collect::<Vec<_>>(),
        });
        match &mut current {
            Some((ctx, qas)) if *ctx == ex.context => qas.push(qa),
            _ => {
                if let Some((ctx, qas)) = current.take() {
                    paragraphs.push(json!({"context": ctx, "qas": qas}));
                }
                current = Some((ex.context.as_str(), vec![qa]));
            }
        }
    }
    if let Some((ctx, qas)) = current {
        paragraphs.push(json!({"context": ctx, "qas": qas}));
    }
    json!({"version": "1.1", "data": [{"title": "export", "paragraphs": paragraphs}]})
}

#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<QaExample>,
    /// `(example id, reason)` for every dropped example.
    pub dropped: Vec<(String, String)>,
}

/// Keeps the examples whose full question the model already answers
/// correctly. Model errors drop the example. Output order follows input order
/// whatever the number of workers.
pub fn filter_correct(
    examples: &[QaExample],
    handle: &AnswererHandle,
    workers: usize,
) -> FilterOutcome {
    let workers = workers
        .clamp(1, handle.max_inflight())
        .min(examples.len().max(1));
    let verdicts: Vec<std::result::Result<bool, ModelError>> = if workers == 1 {
        examples.iter().map(|ex| judge(ex, handle)).collect()
    } else {
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<std::result::Result<bool, ModelError>>> =
            vec![None; examples.len()];
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= examples.len() {
                        break;
                    }
                    let v = judge(&examples[i], handle);
                    results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(v);
                });
            }
        });
        slots
            .into_iter()
            .map(|v| v.expect("every slot filled"))
            .collect()
    };

    let mut out = FilterOutcome::default();
    for (ex, verdict) in examples.iter().zip(verdicts) {
        match verdict {
            Ok(true) => out.kept.push(ex.clone()),
            Ok(false) => out.dropped.push((ex.id.clone(), "wrong answer".into())),
            Err(e) => {
                log::warn!("dropping {}: {e}", ex.id);
                out.dropped.push((ex.id.clone(), e.to_string()));
            }
        }
    }
    log::info!(
        "filter kept {} of {} examples",
        out.kept.len(),
        examples.len()
    );
    out
}

fn judge(ex: &QaExample, handle: &AnswererHandle) -> std::result::Result<bool, ModelError> {
    let p = handle.predict(&ex.question, &ex.context)?;
    Ok(answer_matches(&p, &ex.ground_truths()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::KeywordOracle;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{
      "version": "1.1",
      "data": [{
        "title": "Grand_Canyon",
        "paragraphs": [{
          "context": "The Grand Canyon is carved into sedimentary rock.",
          "qas": [
            {"id": "q1", "question": "What type of rock is found at the Grand Canyon?",
             "answers": [{"text": "sedimentary", "answer_start": 32}]},
            {"id": "q2", "question": "What is carved into rock?",
             "answers": [{"text": "The Grand Canyon", "answer_start": 0},
                         {"text": "Grand Canyon", "answer_start": 4}]}
          ]
        }]
      }]
    }"#;

    #[test]
    fn loads_minimal_fixture() {
        let d = parse_squad(MINIMAL).unwrap();
        assert!(d.diagnostics.is_empty());
        let ids: Vec<_> = d.examples.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["q1", "q2"]);
        assert_eq!(d.examples[0].answers[0].answer_start, Some(32));
        assert_eq!(
            d.examples[1].ground_truths(),
            ["The Grand Canyon", "Grand Canyon"]
        );
    }

    #[test]
    fn empty_data_and_truncated_json() {
        assert!(parse_squad(r#"{"data": []}"#).unwrap().examples.is_empty());
        assert!(matches!(
            parse_squad(&MINIMAL[..60]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn structural_errors_name_the_path() {
        let path_of = |raw: &str| match parse_squad(raw) {
            Err(Error::Parse { path, .. }) => path,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(path_of(r#"{"version": "1.1"}"#), "$.data");
        assert_eq!(path_of(r#"{"data": [], "extra": 1}"#), "$.extra");
        assert_eq!(
            path_of(r#"{"data": [{"title": "x"}]}"#),
            "$.data[0].paragraphs"
        );
        assert_eq!(
            path_of(
                r#"{"data": [{"paragraphs": [{"context": "c", "qas": [{"id": "a", "answers": []}]}]}]}"#
            ),
            "$.data[0].paragraphs[0].qas[0].question"
        );
        assert_eq!(
            path_of(
                r#"{"data": [{"paragraphs": [{"context": "c", "qas": [{"id": "a", "question": "q", "answers": [], "is_impossible": true}]}]}]}"#
            ),
            "$.data[0].paragraphs[0].qas[0].is_impossible"
        );
    }

    #[test]
    fn bad_offsets_are_dropped_with_a_diagnostic() {
        let raw = MINIMAL.replace("\"answer_start\": 32", "\"answer_start\": 31");
        let d = parse_squad(&raw).unwrap();
        assert_eq!(d.examples[0].answers[0].answer_start, None);
        assert_eq!(d.diagnostics.len(), 1);
        assert!(d.diagnostics[0].path.ends_with("answers[0].answer_start"));
    }

    #[test]
    fn offsets_are_in_characters() {
        let raw = r#"{"data": [{"paragraphs": [{"context": "Café owners sell crêpes.", "qas": [
            {"id": "u", "question": "What?", "answers": [{"text": "crêpes", "answer_start": 17}]}]}]}]}"#;
        let d = parse_squad(raw).unwrap();
        assert!(d.diagnostics.is_empty(), "{:?}", d.diagnostics);
        assert_eq!(d.examples[0].answers[0].answer_start, Some(17));
    }

    #[test]
    fn filter_keeps_constructed_subset() {
        let examples = parse_squad(MINIMAL).unwrap().examples;
        // context word 6 is "sedimentary"; only q1 mentions "type"
        let handle = AnswererHandle::keyword_oracle(KeywordOracle::new("type", 6).unwrap());
        for workers in [1, 3] {
            let out = filter_correct(&examples, &handle, workers);
            assert_eq!(
                out.kept.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(),
                ["q1"]
            );
            assert_eq!(out.dropped.len(), 1);
        }
    }

    #[test]
    fn filter_extremes_and_errors() {
        let examples = parse_squad(MINIMAL).unwrap().examples;
        let oracle =
            |target| AnswererHandle::keyword_oracle(KeywordOracle::new("zzz", target).unwrap());
        // no keyword: always answers word 0, "The", which normalizes away
        assert!(filter_correct(&examples, &oracle(0), 1).kept.is_empty());
        // out-of-range target: model error on every example, none fatal
        let out = filter_correct(&examples, &oracle(40), 2);
        assert!(out.kept.is_empty());
        assert_eq!(out.dropped.len(), 2);
        assert!(out.dropped[0].1.contains("exceeds"));
    }

    proptest! {
        #[test]
        fn load_is_lossless(
            items in proptest::collection::vec(
                ("[a-z]{1,8}", "[A-Za-z ?]{1,30}", 0usize..3, proptest::collection::vec(("[a-z]{1,6}", any::<bool>()), 1..3)),
                0..8,
            )
        ) {
            let contexts = ["Alpha beta gamma delta.", "Ωmega and ünïcode text here", "one more context"];
            let examples: Vec<QaExample> = items.iter().enumerate().map(|(i, (id, q, c, answers))| {
                let context = contexts[*c].to_string();
                let answers = answers.iter().map(|(t, anchored)| {
                    // anchor a real substring of the context when asked
                    if *anchored {
                        let text: String = context.chars().skip(2).take(3).collect();
                        Answer { text, answer_start: Some(2) }
                    } else {
                        Answer { text: t.clone(), answer_start: None }
                    }
                }).collect();
                QaExample { id: format!("{id}{i}"), question: q.clone(), context, answers }
            }).collect();
            let raw = serde_json::to_string(&to_squad_json(&examples)).unwrap();
            let back = parse_squad(&raw).unwrap();
            prop_assert!(back.diagnostics.is_empty());
            prop_assert_eq!(back.examples, examples);
        }

        #[test]
        fn filter_output_is_an_ordered_subsequence(keys in proptest::collection::vec(any::<bool>(), 0..12)) {
            let examples: Vec<QaExample> = keys.iter().enumerate().map(|(i, &k)| QaExample {
                id: format!("e{i}"),
                question: if k { "which type".into() } else { "which kind".into() },
                context: "sedimentary rock".into(),
                answers: vec![Answer { text: "rock".into(), answer_start: Some(12) }],
            }).collect();
            // triggered: answers "rock"; otherwise "sedimentary"
            let handle = AnswererHandle::keyword_oracle(KeywordOracle::new("type", 1).unwrap());
            let out = filter_correct(&examples, &handle, 4);
            let expected: Vec<&str> = examples.iter().zip(&keys).filter(|(_, &k)| k).map(|(e, _)| e.id.as_str()).collect();
            prop_assert_eq!(out.kept.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(), expected);
        }
    }
}

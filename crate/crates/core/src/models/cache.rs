use std::collections::HashMap;

use super::{AnswerPrediction, AnswererHandle};
use crate::error::ModelError;

/// Per-example memo of model answers keyed by the question text. The context
/// is fixed for the lifetime of the cache.
#[derive(Debug)]
pub struct PredictionCache<'a> {
    handle: &'a AnswererHandle,
    context: &'a str,
    answers: HashMap<String, AnswerPrediction>,
    calls: usize,
}

impl<'a> PredictionCache<'a> {
    pub fn new(handle: &'a AnswererHandle, context: &'a str) -> Self {
        PredictionCache {
            handle,
            context,
            answers: HashMap::new(),
            calls: 0,
        }
    }

    pub fn context(&self) -> &str {
        self.context
    }

    pub fn handle(&self) -> &AnswererHandle {
        self.handle
    }

    pub fn predict(&mut self, question: &str) -> Result<&AnswerPrediction, ModelError> {
        if !self.answers.contains_key(question) {
            let p = self.handle.predict(question, self.context)?;
            self.calls += 1;
            self.answers.insert(question.to_string(), p);
        }
        Ok(&self.answers[question])
    }

    /// Number of calls that actually reached the model.
    pub fn model_calls(&self) -> usize {
        self.calls
    }
}

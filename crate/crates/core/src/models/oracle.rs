use super::{context_words, AnswerPrediction, Answerer};
use crate::error::{Error, ModelError, Result};
use crate::text;

/// Start-probability mass the oracle puts on its target when triggered.
pub const ORACLE_MASS: f64 = 0.9;

/// Test answerer with a known ground-truth attribution: it points at a fixed
/// context position if and only if the question contains one keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordOracle {
    keyword: String,
    target: usize,
    span_end: usize,
}

impl KeywordOracle {
    pub fn new(keyword: &str, target: usize) -> Result<Self> {
        let keyword = text::normalize(keyword);
        if keyword.is_empty() || keyword.contains(' ') {
            return Err(Error::Config(format!(
                "oracle keyword must be a single word, got {keyword:?}"
            )));
        }
        Ok(KeywordOracle {
            keyword,
            target,
            span_end: target,
        })
    }

    /// Widens the answer span to `[target, end]`.
    pub fn with_span_end(mut self, end: usize) -> Result<Self> {
        if end < self.target {
            return Err(Error::Config(format!(
                "span end {end} precedes target {}",
                self.target
            )));
        }
        self.span_end = end;
        Ok(self)
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn triggered_by(&self, question: &str) -> bool {
        text::tokenize(question)
            .words()
            .any(|t| text::normalize(&t.text) == self.keyword)
    }
}

impl Answerer for KeywordOracle {
    fn predict(
        &self,
        question: &str,
        context: &str,
    ) -> std::result::Result<AnswerPrediction, ModelError> {
        let tokens = context_words(context);
        let n = tokens.len();
        if self.span_end >= n {
            return Err(ModelError::Config(format!(
                "oracle span [{}, {}] exceeds the {n}-word context",
                self.target, self.span_end
            )));
        }
        if !self.triggered_by(question) {
            let uniform = vec![1.0 / n as f64; n];
            return Ok(AnswerPrediction::from_span(tokens, uniform, 0, 0));
        }
        let distribution = if n == 1 {
            vec![1.0]
        } else {
            let rest = (1.0 - ORACLE_MASS) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == self.target { ORACLE_MASS } else { rest })
                .collect()
        };
        Ok(AnswerPrediction::from_span(
            tokens,
            distribution,
            self.target,
            self.span_end,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CTX: &str = "Layers here are mostly of sedimentary rock and shale";

    #[test]
    fn keyword_present_concentrates_mass() {
        let o = KeywordOracle::new("type", 5).unwrap();
        let p = o.predict("type of rock", CTX).unwrap();
        assert_eq!(p.start_distribution[5], 0.9);
        let rest = 0.1 / 8.0;
        for (i, &x) in p.start_distribution.iter().enumerate() {
            if i != 5 {
                assert!((x - rest).abs() < 1e-15);
            }
        }
        assert_eq!((p.start_token, p.end_token), (5, 5));
        assert_eq!(p.answer_text, "sedimentary");
        p.validate().unwrap();
    }

    #[test]
    fn keyword_absent_is_uniform() {
        let o = KeywordOracle::new("type", 5).unwrap();
        let p = o.predict("where is it", CTX).unwrap();
        assert!(p
            .start_distribution
            .iter()
            .all(|&x| (x - 1.0 / 9.0).abs() < 1e-15));
        assert_eq!((p.start_token, p.answer_text.as_str()), (0, "Layers"));
    }

    #[test]
    fn keyword_match_is_case_and_punctuation_blind() {
        let o = KeywordOracle::new("Type", 0).unwrap();
        assert!(o.triggered_by("What TYPE?"));
        assert!(!o.triggered_by("typed"));
    }

    #[test]
    fn out_of_range_target_is_a_config_error() {
        let o = KeywordOracle::new("type", 20).unwrap();
        assert!(matches!(o.predict("type", CTX), Err(ModelError::Config(_))));
        assert!(KeywordOracle::new("two words", 0).is_err());
        assert!(KeywordOracle::new("x", 3)
            .unwrap()
            .with_span_end(2)
            .is_err());
    }

    #[test]
    fn wider_span() {
        let o = KeywordOracle::new("type", 5)
            .unwrap()
            .with_span_end(6)
            .unwrap();
        assert_eq!(
            o.predict("type", CTX).unwrap().answer_text,
            "sedimentary rock"
        );
    }
}

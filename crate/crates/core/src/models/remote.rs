//! HTTP client for answerers speaking the JSON predict protocol.
//!
//! `POST /predict` with `{"question": ..., "context": ...}` returns
//! `{"answer": {"text", "start_token", "end_token"}, "context_tokens": [...],
//! "start_distribution": [...]}`; `GET /health` returns `{"status": "ok"}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AnswerPrediction, Answerer};
use crate::error::ModelError;

/// Question and context used by the handshake round-trip.
pub const PROBE_QUESTION: &str = "What type of rock is found at the Grand Canyon?";
pub const PROBE_CONTEXT: &str =
    "The walls of the Grand Canyon are made mostly of sedimentary rock laid down over millions of years.";

const RETRIES: usize = 2;

#[derive(Debug, Serialize)]
pub(crate) struct PredictRequest<'a> {
    pub question: &'a str,
    pub context: &'a str,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireAnswer {
    pub text: String,
    pub start_token: i64,
    pub end_token: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct PredictResponse {
    pub answer: WireAnswer,
    pub context_tokens: Vec<String>,
    pub start_distribution: Vec<f64>,
}

impl PredictResponse {
    pub(crate) fn from_prediction(p: &AnswerPrediction) -> Self {
        PredictResponse {
            answer: WireAnswer {
                text: p.answer_text.clone(),
                start_token: p.start_token as i64,
                end_token: p.end_token as i64,
            },
            context_tokens: p.context_tokens.clone(),
            start_distribution: p.start_distribution.clone(),
        }
    }

    fn into_prediction(self) -> Result<AnswerPrediction, ModelError> {
        let index = |v: i64, name: &str| {
            usize::try_from(v).map_err(|_| ModelError::Protocol {
                check: "index",
                detail: format!("{name} = {v}"),
            })
        };
        let prediction = AnswerPrediction {
            answer_text: self.answer.text,
            start_token: index(self.answer.start_token, "start_token")?,
            end_token: index(self.answer.end_token, "end_token")?,
            context_tokens: self.context_tokens,
            start_distribution: self.start_distribution,
        };
        prediction.validate()?;
        Ok(prediction)
    }
}

#[derive(Debug, Deserialize)]
struct Health {
    status: String,
}

pub struct RemoteAnswerer {
    base: String,
    agent: ureq::Agent,
}

impl RemoteAnswerer {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(Duration::from_secs(120))
            .build();
        RemoteAnswerer {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// `GET /health`; succeeds only on `{"status": "ok"}`.
    pub fn check_health(&self) -> Result<(), ModelError> {
        let resp = self
            .agent
            .get(&format!("{}/health", self.base))
            .call()
            .map_err(transport)?;
        let body = resp
            .into_string()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        let health: Health = serde_json::from_str(&body).map_err(|e| ModelError::Protocol {
            check: "health",
            detail: format!("{e}: {body}"),
        })?;
        if health.status != "ok" {
            return Err(ModelError::Protocol {
                check: "health",
                detail: format!("status is {:?}", health.status),
            });
        }
        Ok(())
    }

    fn predict_once(&self, question: &str, context: &str) -> Result<AnswerPrediction, ModelError> {
        let resp = self
            .agent
            .post(&format!("{}/predict", self.base))
            .set("Content-Type", "application/json")
            .send_string(
                &serde_json::to_string(&PredictRequest { question, context })
                    .expect("serializable"),
            )
            .map_err(transport)?;
        let body = resp
            .into_string()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        let parsed: PredictResponse =
            serde_json::from_str(&body).map_err(|e| ModelError::Protocol {
                check: "payload",
                detail: e.to_string(),
            })?;
        parsed.into_prediction()
    }
}

fn transport(err: ureq::Error) -> ModelError {
    match err {
        ureq::Error::Status(code, resp) if (400..500).contains(&code) => {
            let body = resp.into_string().unwrap_or_default();
            ModelError::InvalidInput(format!("server rejected request ({code}): {body}"))
        }
        ureq::Error::Status(code, _) => ModelError::Transport(format!("server returned {code}")),
        ureq::Error::Transport(t) => ModelError::Transport(t.to_string()),
    }
}

impl Answerer for RemoteAnswerer {
    fn predict(&self, question: &str, context: &str) -> Result<AnswerPrediction, ModelError> {
        let mut attempt = 0;
        loop {
            match self.predict_once(question, context) {
                Err(e) if e.is_retryable() && attempt < RETRIES => {
                    attempt += 1;
                    log::debug!("retrying predict after {e} (attempt {attempt})");
                    std::thread::sleep(Duration::from_millis(50 << attempt));
                }
                other => return other,
            }
        }
    }

    fn health(&self) -> Result<(), ModelError> {
        self.check_health()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::stub::StubServer;

    #[test]
    fn round_trip_against_conforming_stub() {
        let server = StubServer::baseline().unwrap();
        let remote = RemoteAnswerer::new(&server.url());
        remote.check_health().unwrap();
        let p = remote.predict(PROBE_QUESTION, PROBE_CONTEXT).unwrap();
        let local = crate::models::baseline_predict(PROBE_QUESTION, PROBE_CONTEXT).unwrap();
        assert_eq!(p, local);
    }

    #[test]
    fn request_body_is_exact() {
        let body = serde_json::to_string(&PredictRequest {
            question: "q \"x\"",
            context: "c",
        })
        .unwrap();
        assert_eq!(body, r#"{"question":"q \"x\"","context":"c"}"#);
    }

    #[test]
    fn protocol_violations_name_the_check() {
        let cases = [
            (
                r#"{"answer":{"text":"a","start_token":0,"end_token":0},"context_tokens":["a","b"],"start_distribution":[1.0]}"#,
                "length",
            ),
            (
                r#"{"answer":{"text":"a","start_token":0,"end_token":0},"context_tokens":["a","b"],"start_distribution":[0.7,0.7]}"#,
                "sum",
            ),
            (
                r#"{"answer":{"text":"a","start_token":1,"end_token":3},"context_tokens":["a","b"],"start_distribution":[0.5,0.5]}"#,
                "index",
            ),
            (
                r#"{"answer":{"text":"a","start_token":-1,"end_token":0},"context_tokens":["a","b"],"start_distribution":[0.5,0.5]}"#,
                "index",
            ),
            (r#"{"answer":{"text":"a"},"context_tokens":[]}"#, "payload"),
        ];
        for (body, expected) in cases {
            let body = body.to_string();
            let server = StubServer::new(move |_m: &str, path: &str, _b: &str| {
                if path == "/predict" {
                    (200, body.clone())
                } else {
                    (200, r#"{"status": "ok"}"#.into())
                }
            })
            .unwrap();
            let err = RemoteAnswerer::new(&server.url())
                .predict("q", "a b")
                .unwrap_err();
            match err {
                ModelError::Protocol { check, .. } => assert_eq!(check, expected),
                other => panic!("expected protocol error, got {other:?}"),
            }
        }
    }

    #[test]
    fn unhealthy_server_and_status_codes() {
        let server = StubServer::new(|_m: &str, path: &str, _b: &str| match path {
            "/health" => (200, r#"{"status": "loading"}"#.into()),
            _ => (422, r#"{"error": "context too long"}"#.into()),
        })
        .unwrap();
        let remote = RemoteAnswerer::new(&server.url());
        assert!(matches!(
            remote.check_health(),
            Err(ModelError::Protocol {
                check: "health",
                ..
            })
        ));
        assert!(matches!(
            remote.predict("q", "c"),
            Err(ModelError::InvalidInput(_))
        ));
    }

    #[test]
    fn unreachable_server_is_retryable() {
        let url = {
            let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
            format!("http://{}", listener.local_addr().unwrap())
        };
        let err = RemoteAnswerer::new(&url).predict("q", "c").unwrap_err();
        assert!(err.is_retryable(), "{err:?}");
    }
}

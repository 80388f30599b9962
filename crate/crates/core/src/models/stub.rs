//! Minimal in-process HTTP server for exercising the remote protocol without
//! a real model. Not meant for production traffic: one connection at a time,
//! `Connection: close` on every response.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::baseline_predict;
use super::remote::PredictResponse;

type Responder = dyn Fn(&str, &str, &str) -> (u16, String) + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Serves `responder(method, path, body) -> (status, json body)`.
    pub fn new<F>(responder: F) -> std::io::Result<Self>
    where
        F: Fn(&str, &str, &str) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let responder: Box<Responder> = Box::new(responder);
        let worker = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = stream {
                    let _ = serve_one(stream, responder.as_ref());
                }
            }
        });
        Ok(StubServer {
            addr,
            stop,
            worker: Some(worker),
        })
    }

    /// A conforming server backed by the built-in baseline reader.
    pub fn baseline() -> std::io::Result<Self> {
        Self::new(|method, path, body| match (method, path) {
            ("GET", "/health") => (200, r#"{"status": "ok"}"#.to_string()),
            ("POST", "/predict") => {
                let Ok(req) = serde_json::from_str::<serde_json::Value>(body) else {
                    return (400, r#"{"error": "malformed request"}"#.to_string());
                };
                let (Some(q), Some(c)) = (req["question"].as_str(), req["context"].as_str()) else {
                    return (400, r#"{"error": "malformed request"}"#.to_string());
                };
                match baseline_predict(q, c) {
                    Ok(p) => (
                        200,
                        serde_json::to_string(&PredictResponse::from_prediction(&p))
                            .expect("serializable"),
                    ),
                    Err(e) => (
                        400,
                        serde_json::json!({ "error": e.to_string() }).to_string(),
                    ),
                }
            }
            _ => (404, r#"{"error": "not found"}"#.to_string()),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn serve_one(stream: TcpStream, responder: &Responder) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();

    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = String::from_utf8_lossy(&body);

    let (status, payload) = responder(&method, &path, &body);
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        422 => "Unprocessable Entity",
        _ => "Status",
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    )?;
    out.flush()
}

//! HTTP text backend for the agents stage.
//!
//! Talks to any endpoint that accepts an OpenAI-style chat-completions
//! request (`{"model", "messages", "temperature", "max_tokens"}`) and answers
//! with `choices[0].message.content`. Configuration comes from the
//! environment:
//!
//! * `EDSMF_BACKEND_URL` — full endpoint URL (required)
//! * `EDSMF_MODEL` — model id sent with each request (required)
//! * `EDSMF_API_KEY` — bearer token (optional)
//!
//! Transport failures, 429 and 5xx answers are retried three times with
//! exponential backoff; other 4xx answers are reported as refusals at once.

use std::thread::sleep;
use std::time::Duration;

use edsmf_core::agents::{BackendError, GenerationParams, TextBackend};
use serde_json::{json, Value};

pub const ENV_URL: &str = "EDSMF_BACKEND_URL";
pub const ENV_MODEL: &str = "EDSMF_MODEL";
pub const ENV_KEY: &str = "EDSMF_API_KEY";

pub const RETRIES: u32 = 3;

#[derive(Clone, Debug)]
pub struct HttpBackend {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    /// Delay before the first retry; doubled for each further one.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        HttpBackend {
            url: url.into(),
            model: model.into(),
            api_key,
            backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(120),
        }
    }

    /// Build from the environment; the error names the missing variable.
    pub fn from_env() -> Result<Self, String> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let url = var(ENV_URL).ok_or_else(|| format!("{ENV_URL} is not set"))?;
        let model = var(ENV_MODEL).ok_or_else(|| format!("{ENV_MODEL} is not set"))?;
        Ok(HttpBackend::new(url, model, var(ENV_KEY)))
    }

    fn attempt(&self, agent: &ureq::Agent, body: &Value) -> Result<String, (bool, BackendError)> {
        let mut req = agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| (true, BackendError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| (true, BackendError::Transport(e.to_string())))?;
        match status {
            200..=299 => {}
            429 | 500..=599 => return Err((true, BackendError::Transport(format!("HTTP {status}: {text}")))),
            _ => return Err((false, BackendError::Refusal(format!("HTTP {status}: {text}")))),
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| (false, BackendError::Transport(format!("response is not JSON: {e}"))))?;
        let choice = &value["choices"][0];
        if choice["finish_reason"] == "content_filter" {
            return Err((false, BackendError::Refusal("content filter".into())));
        }
        choice["message"]["content"]
            .as_str()
            .or_else(|| choice["text"].as_str())
            .map(String::from)
            .ok_or_else(|| (false, BackendError::Transport(format!("no completion text in response: {text}"))))
    }
}

impl TextBackend for HttpBackend {
    fn backend_id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(self.timeout))
            .build();
        let agent = ureq::Agent::new_with_config(config);
        let body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(&agent, &body) {
                Ok(text) => return Ok(text),
                Err((true, _)) if attempt < RETRIES => {
                    attempt += 1;
                    sleep(delay);
                    delay *= 2;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    /// Serve canned `(status, body)` answers in order; returns the URL and
    /// the request bodies seen.
    fn serve(answers: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        std::thread::spawn(move || {
            for (status, body) in answers {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log.lock().unwrap().push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (url, seen)
    }

    fn ok(text: &str) -> (u16, String) {
        (200, json!({ "choices": [{ "message": { "content": text } }] }).to_string())
    }

    fn backend(url: String) -> HttpBackend {
        HttpBackend { backoff: Duration::from_millis(1), ..HttpBackend::new(url, "m1", Some("k".into())) }
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, seen) = serve(vec![(503, "busy".into()), (500, "oops".into()), ok("hello")]);
        let out = backend(url).generate("Role: News Analyst\nhi", &GenerationParams::default()).unwrap();
        assert_eq!(out, "hello");
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 3);
        let req: Value = serde_json::from_str(&seen[0]).unwrap();
        assert_eq!(req["model"], "m1");
        assert_eq!(req["temperature"], 0.0);
        assert_eq!(req["messages"][0]["content"], "Role: News Analyst\nhi");
    }

    #[test]
    fn gives_up_after_three_retries() {
        let (url, seen) = serve(vec![(500, "a".into()), (500, "b".into()), (500, "c".into()), (500, "d".into())]);
        let err = backend(url).generate("p", &GenerationParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::Transport(ref m) if m.contains("500")), "{err}");
        assert_eq!(seen.lock().unwrap().len(), 4);
    }

    #[test]
    fn client_errors_are_refusals_without_retry() {
        let (url, seen) = serve(vec![(400, "bad request".into())]);
        let err = backend(url).generate("p", &GenerationParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::Refusal(_)));
        assert_eq!(seen.lock().unwrap().len(), 1);
    }
}

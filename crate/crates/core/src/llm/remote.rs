use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Completion, CompletionRequest, GuidanceBackend, LlmError, StopReason};

/// Minimum spacing between requests, shared by every backend holding a clone.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    interval: Duration,
    next: Arc<Mutex<Instant>>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next: Arc::new(Mutex::new(Instant::now())),
        }
    }

    pub fn unlimited() -> Self {
        Self::per_second(0.0)
    }

    /// Blocks until the caller may send.
    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Base URL up to and excluding `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout: Duration,
    /// Transport retries after the first attempt.
    pub retries: u32,
    pub backoff: Duration,
    pub rate_limit: RateLimiter,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: "TACSEARCH_API_KEY".into(),
            timeout: Duration::from_secs(120),
            retries: 4,
            backoff: Duration::from_millis(500),
            rate_limit: RateLimiter::unlimited(),
        }
    }
}

/// Chat-completions client. Always asks for a single choice.
pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fatal(LlmError),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!(
                "{} is not set; sending requests without a key",
                config.api_key_env
            );
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            api_key,
            agent,
        }
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut messages = vec![json!({"role": "system", "content": request.system})];
        messages.extend(
            request
                .turns
                .iter()
                .map(|t| json!({"role": t.role, "content": t.content})),
        );
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "n": 1,
        });
        if !request.stop.is_empty() {
            body["stop"] = json!(request.stop);
        }
        body
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<(String, StopReason), Attempt> {
        self.config.rate_limit.acquire();
        let mut req = self.agent.post(url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Retry(format!("reading body: {e}")))?;
        if status != 200 {
            return Err(Attempt::Fatal(LlmError::Protocol(format!(
                "HTTP {status}: {v}"
            ))));
        }
        parse_choice(&v).map_err(Attempt::Fatal)
    }
}

fn parse_choice(v: &Value) -> Result<(String, StopReason), LlmError> {
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::Protocol("no choices in response".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let stop = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => StopReason::LengthCap,
        _ => StopReason::Natural,
    };
    Ok((text, stop))
}

impl GuidanceBackend for RemoteBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        request.validate()?;
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = self.body(request);
        let start = Instant::now();
        let mut delay = self.config.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&url, &body) {
                Ok((text, stop_reason)) => {
                    return Ok(Completion {
                        text,
                        stop_reason,
                        latency: start.elapsed(),
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempts > self.config.retries {
                        return Err(LlmError::Transport { attempts, message });
                    }
                    log::debug!("attempt {attempts} failed ({message}); retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Minimal HTTP server. `fail_first` connections get a 503; afterwards
    /// the reply echoes the last user message, cut to `max_tokens` words.
    fn mock_server(
        fail_first: usize,
        connections: usize,
    ) -> (String, thread::JoinHandle<Vec<Value>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = thread::spawn(move || {
            let mut seen = Vec::new();
            for i in 0..connections {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let req: Value = serde_json::from_slice(&buf).unwrap();
                let (status, body) = if i < fail_first {
                    ("503 Service Unavailable", json!({"error": "busy"}))
                } else {
                    let cap = req["max_tokens"].as_u64().unwrap() as usize;
                    let msgs = req["messages"].as_array().unwrap();
                    let prompt = msgs.last().unwrap()["content"].as_str().unwrap();
                    let words: Vec<_> = prompt.split_whitespace().collect();
                    let (text, finish) = if words.len() > cap {
                        (words[..cap].join(" "), "length")
                    } else {
                        (words.join(" "), "stop")
                    };
                    (
                        "200 OK",
                        json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": finish}]}),
                    )
                };
                seen.push(req);
                let body = body.to_string();
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
                s.flush().unwrap();
            }
            seen
        });
        (format!("http://{addr}"), handle)
    }

    fn config(base_url: String) -> RemoteConfig {
        RemoteConfig {
            base_url,
            api_key_env: "TACSEARCH_TEST_UNSET_KEY".into(),
            timeout: Duration::from_secs(5),
            retries: 3,
            backoff: Duration::from_millis(5),
            ..RemoteConfig::default()
        }
    }

    #[test]
    fn length_cap_maps_to_stop_reason() {
        let (url, server) = mock_server(0, 2);
        let mut b = RemoteBackend::new(config(url));
        let mut req = CompletionRequest::new("sys", "[RUN TACTIC] linarith, [END]");
        req.max_tokens = 1;
        let c = b.complete(&req).unwrap();
        assert_eq!(c.stop_reason, StopReason::LengthCap);
        assert_eq!(c.text, "[RUN");
        req.max_tokens = 64;
        let c = b.complete(&req).unwrap();
        assert_eq!(c.stop_reason, StopReason::Natural);
        let seen = server.join().unwrap();
        assert_eq!(seen[0]["n"], 1);
        assert_eq!(seen[0]["temperature"], 0.0);
        assert_eq!(seen[0]["messages"][0]["role"], "system");
    }

    #[test]
    fn transient_failures_are_retried_once_delivered() {
        let (url, server) = mock_server(2, 3);
        let mut b = RemoteBackend::new(config(url));
        let c = b.complete(&CompletionRequest::new("s", "ok")).unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn exhausted_retries_are_infrastructure_errors() {
        let (url, server) = mock_server(4, 4);
        let mut b = RemoteBackend::new(config(url));
        let e = b.complete(&CompletionRequest::new("s", "x")).unwrap_err();
        assert!(matches!(e, LlmError::Transport { attempts: 4, .. }), "{e}");
        server.join().unwrap();
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let rl = RateLimiter::per_second(100.0);
        let start = Instant::now();
        for _ in 0..5 {
            rl.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(35));
    }
}

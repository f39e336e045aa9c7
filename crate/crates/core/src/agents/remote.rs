//! Chat-completions style HTTP backend.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{Attachment, BackendError, ExtractionBackend};

pub const ENV_URL: &str = "CHEMMINER_LLM_URL";
pub const ENV_MODEL: &str = "CHEMMINER_LLM_MODEL";
pub const ENV_KEY: &str = "CHEMMINER_LLM_KEY";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub url: Option<String>,
    pub model: Option<String>,
    /// Never written to config snapshots.
    #[serde(skip)]
    pub key: Option<String>,
    pub context_limit: usize,
    pub multimodal: bool,
    pub timeout_secs: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: None,
            model: None,
            key: None,
            context_limit: 128_000,
            multimodal: false,
            timeout_secs: 120,
        }
    }
}

impl RemoteConfig {
    /// Overrides url, model and key from the environment where set.
    pub fn apply_env(&mut self) {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        if let Some(v) = var(ENV_URL) {
            self.url = Some(v);
        }
        if let Some(v) = var(ENV_MODEL) {
            self.model = Some(v);
        }
        if let Some(v) = var(ENV_KEY) {
            self.key = Some(v);
        }
    }

    /// Missing settings, by environment variable name.
    pub fn missing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.url.is_none() {
            out.push(ENV_URL);
        }
        if self.model.is_none() {
            out.push(ENV_MODEL);
        }
        out
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    key: Option<String>,
    context_limit: usize,
    multimodal: bool,
}

impl RemoteBackend {
    /// Fails with the names of missing settings when url or model is unset.
    pub fn new(cfg: &RemoteConfig) -> Result<Self, Vec<&'static str>> {
        let (Some(url), Some(model)) = (cfg.url.clone(), cfg.model.clone()) else {
            return Err(cfg.missing());
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url,
            model,
            key: cfg.key.clone(),
            context_limit: cfg.context_limit.max(1),
            multimodal: cfg.multimodal,
        })
    }

    fn request_body(&self, prompt: &str, content: &str, budget: usize, attachments: &[Attachment]) -> Value {
        let user = if attachments.is_empty() || !self.multimodal {
            Value::String(content.to_string())
        } else {
            let mut parts = vec![json!({"type": "text", "text": content})];
            for a in attachments {
                let data = base64::engine::general_purpose::STANDARD.encode(&a.bytes);
                parts.push(json!({
                    "type": "image_url",
                    "image_url": {"url": format!("data:{};base64,{data}", a.mime)},
                }));
            }
            Value::Array(parts)
        };
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt},
                {"role": "user", "content": user},
            ],
            "max_tokens": budget,
        })
    }

    fn send(&self, body: Value) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(k) = &self.key {
            req = req.header("Authorization", format!("Bearer {k}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| BackendError::Transport(e.to_string()))?;
        match resp.status().as_u16() {
            429 => return Err(BackendError::RateLimited),
            s if !(200..300).contains(&s) => {
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(BackendError::Transport(format!("HTTP {s}: {}", text.trim())));
            }
            _ => {}
        }
        let completion: Completion = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transport(format!("bad response body: {e}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Transport("response has no choices".into()))
    }
}

impl ExtractionBackend for RemoteBackend {
    fn submit(&self, prompt: &str, content: &str, token_budget: usize) -> Result<String, BackendError> {
        self.send(self.request_body(prompt, content, token_budget, &[]))
    }

    fn context_limit(&self) -> usize {
        self.context_limit
    }

    fn is_multimodal(&self) -> bool {
        self.multimodal
    }

    fn submit_with_attachments(
        &self,
        prompt: &str,
        content: &str,
        token_budget: usize,
        attachments: &[Attachment],
    ) -> Result<String, BackendError> {
        self.send(self.request_body(prompt, content, token_budget, attachments))
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    use super::*;

    /// Serves one canned HTTP response and hands back the request body.
    fn serve_once(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            let mut stream = stream;
            stream.write_all(response.as_bytes()).unwrap();
            String::from_utf8(buf).unwrap()
        });
        (url, handle)
    }

    fn backend(url: String, multimodal: bool) -> RemoteBackend {
        RemoteBackend::new(&RemoteConfig {
            url: Some(url),
            model: Some("m".into()),
            key: Some("secret".into()),
            multimodal,
            timeout_secs: 10,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn wire_format_round_trip() {
        let (url, server) = serve_once("200 OK", r#"{"choices":[{"message":{"content":"{\"1b\": \"x\"}"}}]}"#);
        let out = backend(url, false).submit("PROMPT", "CONTENT", 77).unwrap();
        assert_eq!(out, r#"{"1b": "x"}"#);
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["model"], "m");
        assert_eq!(sent["max_tokens"], 77);
        assert_eq!(sent["messages"][0], json!({"role": "system", "content": "PROMPT"}));
        assert_eq!(sent["messages"][1], json!({"role": "user", "content": "CONTENT"}));
    }

    #[test]
    fn status_429_is_rate_limited() {
        let (url, server) = serve_once("429 Too Many Requests", "{}");
        assert_eq!(backend(url, false).submit("p", "c", 1), Err(BackendError::RateLimited));
        server.join().unwrap();
    }

    #[test]
    fn attachments_become_data_urls() {
        let (url, server) = serve_once("200 OK", r#"{"choices":[{"message":{"content":"{}"}}]}"#);
        let att = Attachment {
            mime: "image/jpeg".into(),
            bytes: Arc::from(&[1u8, 2, 3][..]),
        };
        backend(url, true).submit_with_attachments("p", "c", 5, &[att]).unwrap();
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["messages"][1]["content"][1]["image_url"]["url"], "data:image/jpeg;base64,AQID");
    }

    #[test]
    fn missing_settings_are_named() {
        let err = RemoteBackend::new(&RemoteConfig::default()).err().unwrap();
        assert_eq!(err, [ENV_URL, ENV_MODEL]);
    }

    #[test]
    fn unreachable_host_is_transport_error() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        drop(listener);
        assert!(matches!(backend(url, false).submit("p", "c", 1), Err(BackendError::Transport(_))));
    }
}

//! Vision-language model clients: a record/replay fixture store and an HTTP adapter.

use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::Engine;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const VLM_URL_ENV: &str = "CHART2SVG_VLM_URL";
pub const VLM_TOKEN_ENV: &str = "CHART2SVG_VLM_TOKEN";
pub const FIXTURES_ENV: &str = "CHART2SVG_FIXTURES";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("client unavailable: {0}")]
    Unavailable(String),
    #[error("request timed out")]
    Timeout,
}

/// Image bytes plus prompt text in, reply text out.
pub trait VlmClient: Send + Sync {
    fn complete(&self, image_png: &[u8], prompt: &str) -> Result<String, ClientError>;

    /// Whether concurrent calls are safe; callers serialize otherwise.
    fn concurrent(&self) -> bool {
        true
    }
}

/// Stable key of a request: SHA-256 over the prompt, a NUL separator and the image.
pub fn request_hash(image_png: &[u8], prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    h.update([0u8]);
    h.update(image_png);
    hex::encode(h.finalize())
}

/// Replays responses from a directory: `<hash>.txt` holds a reply, `<hash>.err`
/// a failure (`timeout` for a timeout, anything else for an unavailable client).
#[derive(Debug, Clone)]
pub struct FixtureVlmClient {
    dir: PathBuf,
}

impl FixtureVlmClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureVlmClient { dir: dir.into() }
    }

    pub fn from_env() -> Result<Self, ClientError> {
        std::env::var(FIXTURES_ENV)
            .map(Self::new)
            .map_err(|_| ClientError::Unavailable(format!("{FIXTURES_ENV} is not set")))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stores `reply` as the recorded response to this request.
    pub fn record(&self, image_png: &[u8], prompt: &str, reply: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}.txt", request_hash(image_png, prompt)));
        std::fs::write(&path, reply)?;
        Ok(path)
    }

    /// Stores a failure for this request.
    pub fn record_error(&self, image_png: &[u8], prompt: &str, error: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}.err", request_hash(image_png, prompt)));
        std::fs::write(&path, error)?;
        Ok(path)
    }
}

impl VlmClient for FixtureVlmClient {
    fn complete(&self, image_png: &[u8], prompt: &str) -> Result<String, ClientError> {
        let key = request_hash(image_png, prompt);
        let ok = self.dir.join(format!("{key}.txt"));
        if let Ok(text) = std::fs::read_to_string(&ok) {
            return Ok(text);
        }
        let err = self.dir.join(format!("{key}.err"));
        match std::fs::read_to_string(&err) {
            Ok(e) if e.trim().eq_ignore_ascii_case("timeout") => Err(ClientError::Timeout),
            Ok(e) => Err(ClientError::Unavailable(e.trim().to_string())),
            Err(_) => Err(ClientError::Unavailable(format!("no fixture for request {key}"))),
        }
    }
}

/// JSON-over-HTTP adapter. Sends `{"prompt", "image_base64"}` with a bearer token
/// and accepts either `{"text": ...}` or a plain-text body. Retries transport
/// failures three times with exponential backoff.
#[derive(Debug, Clone)]
pub struct HttpVlmClient {
    url: String,
    token: Option<String>,
    attempts: u32,
    backoff: Duration,
    timeout: Duration,
}

impl HttpVlmClient {
    pub fn new(url: impl Into<String>, token: Option<String>) -> Self {
        HttpVlmClient {
            url: url.into(),
            token,
            attempts: 3,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
        }
    }

    pub fn from_env() -> Result<Self, ClientError> {
        let url = std::env::var(VLM_URL_ENV).map_err(|_| ClientError::Unavailable(format!("{VLM_URL_ENV} is not set")))?;
        Ok(Self::new(url, std::env::var(VLM_TOKEN_ENV).ok()))
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &str) -> Result<String, ClientError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut req = agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => ClientError::Timeout,
            other => ClientError::Unavailable(other.to_string()),
        })?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Unavailable(e.to_string()))?;
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(m)) => match m.get("text") {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                _ => Ok(text),
            },
            _ => Ok(text),
        }
    }
}

impl VlmClient for HttpVlmClient {
    fn complete(&self, image_png: &[u8], prompt: &str) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "prompt": prompt,
            "image_base64": base64::engine::general_purpose::STANDARD.encode(image_png),
        })
        .to_string();
        let mut last = ClientError::Unavailable("no attempt made".into());
        for i in 0..self.attempts {
            match self.attempt(&body) {
                Ok(t) => return Ok(t),
                Err(e) => {
                    log::warn!("vlm request attempt {} failed: {e}", i + 1);
                    last = e;
                    if i + 1 < self.attempts {
                        std::thread::sleep(self.backoff * 2u32.pow(i));
                    }
                }
            }
        }
        Err(last)
    }
}

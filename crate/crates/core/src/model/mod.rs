//! Text-generation client with record/replay caching.

mod cache;
mod transport;

pub use cache::{
    cache_key, canonical_number, CacheEntry, CacheKey, CanonicalRequest, RequestParams,
    ResponseCache,
};
pub use transport::{
    HttpTransport, NetworkError, OfflineTransport, Transport, TransportRequest, TransportResponse,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

pub const DEFAULT_API_KEY_ENV: &str = "TRANSBENCH_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("network failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("replay cache has no entry {digest}")]
    CacheMiss { digest: CacheKey },
    #[error("cache error at {path}: {reason}")]
    Cache { path: PathBuf, reason: String },
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub model_id: String,
    pub endpoint: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry_limit: u32,
    /// Name of the environment variable holding the API credential.
    pub api_key_env: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model_id: String::new(),
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            temperature: 0.2,
            max_tokens: 2048,
            timeout_secs: 120,
            retry_limit: 3,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

impl ModelConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        ModelConfig {
            model_id: model_id.into(),
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.model_id.trim().is_empty() {
            return Err(ModelError::Config("model_id is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ModelError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ModelError::Config("max_tokens must be positive".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ModelError::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }

    fn request_body(&self, prompt: &str) -> serde_json::Value {
        serde_json::json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Live,
    Replay,
    Record,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "replay" => Ok(Mode::Replay),
            "record" => Ok(Mode::Record),
            other => Err(format!("unknown mode `{other}` (live, replay, record)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Replay => "replay",
            Mode::Record => "record",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResponse {
    pub text: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub token_counts: Option<TokenCounts>,
    pub from_cache: bool,
    pub digest: CacheKey,
    /// Raw provider body; kept so postprocessing can be re-run later.
    pub raw: serde_json::Value,
}

/// Pulls the completion text out of a chat-completions (or legacy
/// completions) response body. A null content is an empty completion.
pub fn response_text(raw: &serde_json::Value) -> Result<String, ModelError> {
    let choice = raw
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| ModelError::BadResponse("no choices in response".into()))?;
    if let Some(message) = choice.get("message") {
        return match message.get("content") {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(serde_json::Value::Null) | None => Ok(String::new()),
            Some(other) => Err(ModelError::BadResponse(format!(
                "message content is not a string: {other}"
            ))),
        };
    }
    match choice.get("text") {
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        _ => Err(ModelError::BadResponse("choice has neither message nor text".into())),
    }
}

fn token_counts(raw: &serde_json::Value) -> Option<TokenCounts> {
    let usage = raw.get("usage")?;
    Some(TokenCounts {
        prompt: usage.get("prompt_tokens")?.as_u64()?,
        completion: usage.get("completion_tokens")?.as_u64()?,
    })
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct ModelClient {
    transport: Arc<dyn Transport>,
    cache: Option<ResponseCache>,
    mode: Mode,
    gate: Gate,
    calls: AtomicU64,
    network_requests: AtomicU64,
    backoff: Duration,
}

impl fmt::Debug for ModelClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelClient")
            .field("mode", &self.mode)
            .field("cache", &self.cache)
            .field("calls", &self.calls)
            .finish()
    }
}

impl ModelClient {
    /// `cache` is required for replay and record modes.
    pub fn new(
        transport: Arc<dyn Transport>,
        cache: Option<ResponseCache>,
        mode: Mode,
        max_in_flight: usize,
    ) -> Result<Self, ModelError> {
        if mode != Mode::Live && cache.is_none() {
            return Err(ModelError::Config(format!("{mode} mode needs a cache directory")));
        }
        Ok(ModelClient {
            transport,
            cache,
            mode,
            gate: Gate::new(max_in_flight),
            calls: AtomicU64::new(0),
            network_requests: AtomicU64::new(0),
            backoff: Duration::from_millis(250),
        })
    }

    /// Base delay between retries, doubled per attempt.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// Number of `complete` invocations, cached or not.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Number of requests handed to the transport, retries included.
    pub fn network_request_count(&self) -> u64 {
        self.network_requests.load(Ordering::SeqCst)
    }

    pub fn complete(&self, config: &ModelConfig, prompt: &str) -> Result<ModelResponse, ModelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let request = CanonicalRequest::new(config, prompt);
        let digest = request.key();
        let start = Instant::now();

        if self.mode != Mode::Live {
            let cache = self.cache.as_ref().expect("checked in constructor");
            if let Some(entry) = cache.get(&digest)? {
                return Ok(ModelResponse {
                    text: response_text(&entry.response)?,
                    model_id: config.model_id.clone(),
                    latency_ms: start.elapsed().as_millis() as u64,
                    token_counts: token_counts(&entry.response),
                    from_cache: true,
                    digest,
                    raw: entry.response,
                });
            }
            if self.mode == Mode::Replay {
                return Err(ModelError::CacheMiss { digest });
            }
        }

        let raw = self.send_with_retries(config, prompt)?;
        let text = response_text(&raw)?;
        if self.mode == Mode::Record {
            let cache = self.cache.as_ref().expect("checked in constructor");
            cache.put(&CacheEntry {
                request,
                response: raw.clone(),
                created_at: chrono::Utc::now().to_rfc3339(),
            })?;
        }
        Ok(ModelResponse {
            text,
            model_id: config.model_id.clone(),
            latency_ms: start.elapsed().as_millis() as u64,
            token_counts: token_counts(&raw),
            from_cache: false,
            digest,
            raw,
        })
    }

    fn send_with_retries(
        &self,
        config: &ModelConfig,
        prompt: &str,
    ) -> Result<serde_json::Value, ModelError> {
        let request = TransportRequest {
            endpoint: config.endpoint.clone(),
            body: config.request_body(prompt),
            api_key: std::env::var(&config.api_key_env).ok(),
            timeout: Duration::from_secs(config.timeout_secs),
        };
        let attempts = config.retry_limit + 1;
        let mut last: Option<ModelError> = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.backoff * 2u32.saturating_pow(attempt - 1);
                std::thread::sleep(delay.min(Duration::from_secs(10)));
            }
            let result = {
                let _slot = self.gate.acquire();
                self.network_requests.fetch_add(1, Ordering::SeqCst);
                self.transport.send(&request)
            };
            match result {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return serde_json::from_str(&resp.body)
                        .map_err(|e| ModelError::BadResponse(format!("invalid JSON body: {e}")));
                }
                Ok(resp) => {
                    let err = ModelError::Provider {
                        status: resp.status,
                        body: resp.body.chars().take(512).collect(),
                    };
                    if resp.status != 429 && resp.status < 500 {
                        return Err(err);
                    }
                    last = Some(err);
                }
                Err(e) => {
                    last = Some(ModelError::Transport {
                        attempts,
                        message: e.0,
                    })
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

//! Wire adapters. The default speaks the common chat-completions JSON
//! shape over HTTP.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct TransportRequest {
    pub endpoint: String,
    pub body: serde_json::Value,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct NetworkError(pub String);

pub trait Transport: Send + Sync {
    fn send(&self, request: &TransportRequest) -> Result<TransportResponse, NetworkError>;
}

#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn send(&self, request: &TransportRequest) -> Result<TransportResponse, NetworkError> {
        let mut req = ureq::post(&request.endpoint)
            .timeout(request.timeout)
            .set("Content-Type", "application/json");
        if let Some(key) = &request.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(&request.body) {
            Ok(resp) => {
                let status = resp.status();
                let body = resp
                    .into_string()
                    .map_err(|e| NetworkError(e.to_string()))?;
                Ok(TransportResponse { status, body })
            }
            Err(ureq::Error::Status(status, resp)) => Ok(TransportResponse {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => Err(NetworkError(t.to_string())),
        }
    }
}

/// Refuses every request. Used in replay mode so that a cache miss can
/// never turn into network traffic.
#[derive(Debug, Default)]
pub struct OfflineTransport {
    attempts: AtomicU64,
}

impl OfflineTransport {
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for OfflineTransport {
    fn send(&self, _: &TransportRequest) -> Result<TransportResponse, NetworkError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(NetworkError("offline transport: network use is disabled".into()))
    }
}

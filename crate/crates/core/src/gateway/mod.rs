//! Chat-completion gateway: HTTP or scripted backends behind a content-addressed
//! response cache, with retries and per-endpoint rate limiting.

mod cache;
mod http;
mod limiter;
mod stub;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::strategy::{Phase, PromptBundle};

pub use cache::{CacheEntry, ResponseCache};
pub use http::HttpBackend;
pub use limiter::{InFlight, TokenBucket};
pub use stub::{StubBackend, StubRule, StubScript};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected with HTTP {status}: {excerpt}")]
    Request { status: u16, excerpt: String },
    #[error("retryable HTTP {status}: {excerpt}")]
    Status { status: u16, excerpt: String },
    #[error("replay-only mode: no cached response for key {key}")]
    Replay { key: String },
    #[error("environment variable `{var}` holding the API key is not set")]
    MissingKey { var: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
    #[error("stub backend: {0}")]
    Stub(String),
    #[error("network access disabled")]
    NetworkDisabled,
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport { .. } | GatewayError::Status { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { temperature: 0.7, top_p: 1.0, max_tokens: 1024 }
    }
}

impl Sampling {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p {} must lie in (0, 1]", self.top_p));
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub model_id: String,
    pub base_url: String,
    /// Name of the environment variable holding the API key. The key itself is
    /// read at call time and never stored.
    #[serde(default, alias = "api_key_ref")]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub requests_per_minute: Option<f64>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_in_flight() -> usize {
    8
}

fn default_timeout() -> u64 {
    120
}

impl ModelEndpoint {
    pub fn new(model_id: impl Into<String>, base_url: impl Into<String>) -> Self {
        ModelEndpoint {
            model_id: model_id.into(),
            base_url: base_url.into(),
            api_key_env: None,
            sampling: Sampling::default(),
            requests_per_minute: None,
            max_in_flight: default_in_flight(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_instruction: String,
    pub user_message: String,
    pub phase: Phase,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Stub,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub key: String,
    pub model_id: String,
    pub run_index: u32,
    pub request: ChatRequest,
    pub response: ChatResponse,
    pub backend: BackendKind,
    /// When the response was first produced; cache hits carry the original time.
    pub timestamp: String,
}

/// A source of completions.
pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;
    fn call(&self, endpoint: &ModelEndpoint, request: &ChatRequest, key: &str, run_index: u32) -> Result<ChatResponse, GatewayError>;
}

/// A backend that refuses every call; used to guarantee no network traffic.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineBackend;

impl ChatBackend for OfflineBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn call(&self, _: &ModelEndpoint, _: &ChatRequest, _: &str, _: u32) -> Result<ChatResponse, GatewayError> {
        Err(GatewayError::NetworkDisabled)
    }
}

/// ceil(chars / 3.5), for budgeting only.
pub fn estimate_tokens(text: &str) -> u64 {
    let chars = text.chars().count() as u64;
    (chars * 2).div_ceil(7)
}

/// Content address of an exchange: sha256 over a canonical JSON encoding of
/// (model_id, bundle, sampling, run_index).
pub fn cache_key(model_id: &str, bundle: &PromptBundle, sampling: &Sampling, run_index: u32) -> String {
    let canonical = serde_json::json!({
        "model_id": model_id,
        "phase": bundle.phase,
        "system_instruction": bundle.system_instruction,
        "user_message": bundle.user_message,
        "sampling": {
            "temperature": sampling.temperature,
            "top_p": sampling.top_p,
            "max_tokens": sampling.max_tokens,
        },
        "run_index": run_index,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the base.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

struct EndpointGuards {
    bucket: Option<TokenBucket>,
    in_flight: InFlight,
}

pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    cache: Option<ResponseCache>,
    replay_only: bool,
    retry: RetryPolicy,
    guards: Mutex<HashMap<String, Arc<EndpointGuards>>>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>) -> Self {
        Gateway {
            backend,
            cache: None,
            replay_only: false,
            retry: RetryPolicy::default(),
            guards: Mutex::new(HashMap::new()),
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn replay_only(mut self, on: bool) -> Self {
        self.replay_only = on;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    fn guards_for(&self, endpoint: &ModelEndpoint) -> Arc<EndpointGuards> {
        let mut map = self.guards.lock().expect("guard map poisoned");
        map.entry(endpoint.model_id.clone())
            .or_insert_with(|| {
                Arc::new(EndpointGuards {
                    bucket: endpoint.requests_per_minute.map(TokenBucket::per_minute),
                    in_flight: InFlight::new(endpoint.max_in_flight.max(1)),
                })
            })
            .clone()
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut map = self.key_locks.lock().expect("key lock map poisoned");
        map.entry(key.to_string()).or_default().clone()
    }

    pub fn complete(&self, endpoint: &ModelEndpoint, bundle: &PromptBundle, run_index: u32) -> Result<ChatExchange, GatewayError> {
        let key = cache_key(&endpoint.model_id, bundle, &endpoint.sampling, run_index);
        let request = ChatRequest {
            system_instruction: bundle.system_instruction.clone(),
            user_message: bundle.user_message.clone(),
            phase: bundle.phase,
            sampling: endpoint.sampling,
        };

        // Serialise duplicate requests for the same key so at most one reaches the backend.
        let lock = self.key_lock(&key);
        let _held = lock.lock().expect("key lock poisoned");

        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                return Ok(ChatExchange {
                    key,
                    model_id: entry.model_id,
                    run_index: entry.run_index,
                    request: entry.request,
                    response: entry.response,
                    backend: BackendKind::Cache,
                    timestamp: entry.timestamp,
                });
            }
        }
        if self.replay_only {
            return Err(GatewayError::Replay { key });
        }

        let response = self.call_with_retry(endpoint, &request, &key, run_index)?;
        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        let exchange = ChatExchange {
            key: key.clone(),
            model_id: endpoint.model_id.clone(),
            run_index,
            request,
            response,
            backend: self.backend.kind(),
            timestamp,
        };
        if let Some(cache) = &self.cache {
            cache.put(&CacheEntry::from_exchange(&exchange))?;
        }
        Ok(exchange)
    }

    fn call_with_retry(&self, endpoint: &ModelEndpoint, request: &ChatRequest, key: &str, run_index: u32) -> Result<ChatResponse, GatewayError> {
        let guards = self.guards_for(endpoint);
        let attempts = self.retry.max_attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            if let Some(bucket) = &guards.bucket {
                bucket.acquire();
            }
            let result = {
                let _slot = guards.in_flight.enter();
                self.backend.call(endpoint, request, key, run_index)
            };
            match result {
                Ok(r) => return Ok(r),
                Err(e) if e.is_retryable() => {
                    tracing::warn!(model = %endpoint.model_id, attempt, error = %e, "retryable gateway failure");
                    last = Some(e);
                    if attempt < attempts {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let message = match last {
            Some(GatewayError::Transport { message, .. }) => message,
            Some(other) => other.to_string(),
            None => "no attempt made".into(),
        };
        Err(GatewayError::Transport { attempts, message })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn bundle(user: &str) -> PromptBundle {
        PromptBundle { system_instruction: "sys".into(), user_message: user.into(), phase: Phase::Decision }
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(&"x".repeat(35)), 10);
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("a"), 1);
        assert_eq!(estimate_tokens(&"x".repeat(7)), 2);
        assert_eq!(estimate_tokens(&"x".repeat(8)), 3);
    }

    #[test]
    fn key_separates_run_index_and_sampling() {
        let b = bundle("u");
        let s = Sampling::default();
        assert_ne!(cache_key("m", &b, &s, 0), cache_key("m", &b, &s, 1));
        let s2 = Sampling { temperature: 0.0, ..s };
        assert_ne!(cache_key("m", &b, &s, 0), cache_key("m", &b, &s2, 0));
        assert_eq!(cache_key("m", &b, &s, 0), cache_key("m", &b, &s, 0));
    }

    struct Flaky {
        failures: AtomicU32,
        calls: AtomicU32,
        error: GatewayError,
    }

    impl ChatBackend for Flaky {
        fn kind(&self) -> BackendKind {
            BackendKind::Http
        }
        fn call(&self, _: &ModelEndpoint, _: &ChatRequest, _: &str, _: u32) -> Result<ChatResponse, GatewayError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.failures.load(Ordering::SeqCst) > 0 {
                self.failures.fetch_sub(1, Ordering::SeqCst);
                return Err(self.error.clone());
            }
            Ok(ChatResponse { text: "Decision: Option A".into(), prompt_tokens: 1, completion_tokens: 1 })
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy { max_attempts: 5, base_delay_ms: 1, max_delay_ms: 2 }
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let be = Arc::new(Flaky {
            failures: AtomicU32::new(3),
            calls: AtomicU32::new(0),
            error: GatewayError::Status { status: 503, excerpt: String::new() },
        });
        let gw = Gateway::new(be.clone()).with_retry(fast());
        let ex = gw.complete(&ModelEndpoint::new("m", "http://x"), &bundle("u"), 0).unwrap();
        assert_eq!(ex.response.text, "Decision: Option A");
        assert_eq!(be.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn exhausts_retries() {
        let be = Arc::new(Flaky {
            failures: AtomicU32::new(100),
            calls: AtomicU32::new(0),
            error: GatewayError::Transport { attempts: 1, message: "reset".into() },
        });
        let gw = Gateway::new(be.clone()).with_retry(fast());
        let err = gw.complete(&ModelEndpoint::new("m", "http://x"), &bundle("u"), 0).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 5, .. }));
        assert_eq!(be.calls.load(Ordering::SeqCst), 5);
    }

    #[test]
    fn client_errors_not_retried() {
        let be = Arc::new(Flaky {
            failures: AtomicU32::new(100),
            calls: AtomicU32::new(0),
            error: GatewayError::Request { status: 400, excerpt: "bad".into() },
        });
        let gw = Gateway::new(be.clone()).with_retry(fast());
        assert!(matches!(gw.complete(&ModelEndpoint::new("m", "http://x"), &bundle("u"), 0), Err(GatewayError::Request { .. })));
        assert_eq!(be.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy { max_attempts: 5, base_delay_ms: 100, max_delay_ms: 350 };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(350));
    }
}

//! Single point of access to text-generation and embedding services.
//!
//! Every other module talks to models through the [`ChatBackend`] and
//! [`EmbedBackend`] traits. The [`Gateway`] implementation adds retries
//! with exponential backoff, per-provider token-bucket rate limiting, and
//! an optional write-once record/replay cache, so a populated cache makes
//! the whole downstream pipeline bit-reproducible with zero network calls.

mod cache;
mod http;
pub mod testing;

pub use cache::{cache_key, ReplayCache};
pub use http::HttpProvider;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Provider and model pair naming one model role in the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub provider_id: String,
    pub model: String,
}

impl ModelSpec {
    pub fn new(provider_id: &str, model: &str) -> Self {
        Self {
            provider_id: provider_id.to_string(),
            model: model.to_string(),
        }
    }
}

/// A single chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub provider_id: String,
    pub model: String,
    pub system_prompt: String,
    pub user_prompt: String,
    pub max_output_tokens: u32,
    /// Sampling temperature in [0, 2].
    pub temperature: f64,
    /// Optional request seed. Forwarded to providers that accept one and
    /// part of the cache key, so retry iterations get distinct cache slots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.system_prompt.is_empty() || self.user_prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if self.max_output_tokens < 1 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be >= 1".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(
                "temperature must be in [0, 2]".into(),
            ));
        }
        Ok(())
    }
}

/// A batch embedding request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub provider_id: String,
    pub model: String,
    pub texts: Vec<String>,
}

impl EmbedRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.texts.is_empty() || self.texts.iter().any(|t| t.is_empty()) {
            return Err(GatewayError::InvalidRequest(
                "texts must be non-empty with no empty entries".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed for provider '{0}'")]
    Auth(String),
    #[error("rate limited: retry budget exhausted after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown provider id '{0}'")]
    UnknownProvider(String),
    #[error("cache entry corrupt for key {key}: {reason}")]
    CacheCorrupt { key: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// How a single provider attempt failed.
#[derive(Debug)]
pub enum ProviderFailure {
    /// Transient (HTTP 429/5xx, connection reset); the gateway retries.
    Retryable(String),
    /// Non-retryable; mapped straight to a gateway error.
    Fatal(GatewayError),
}

/// One network round-trip to a concrete provider, without retry logic.
pub trait Provider: Send + Sync {
    fn chat_once(&self, request: &ChatRequest) -> Result<String, ProviderFailure>;
    fn embed_once(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderFailure>;
}

/// Text-generation surface used by the pipeline.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

/// Embedding surface used by the RAG harness.
pub trait EmbedBackend: Send + Sync {
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError>;
}

/// Retry policy for transient provider failures.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_backoff: Duration::from_millis(200),
        }
    }
}

/// Token-bucket limiter shared by all workers hitting one provider.
struct TokenBucket {
    capacity: f64,
    tokens: f64,
    refill_per_sec: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(requests_per_sec: f64) -> Self {
        Self {
            capacity: requests_per_sec.max(1.0),
            tokens: requests_per_sec.max(1.0),
            refill_per_sec: requests_per_sec,
            last: Instant::now(),
        }
    }

    /// Time to wait before a token is available; takes the token.
    fn acquire_delay(&mut self) -> Duration {
        let now = Instant::now();
        self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.refill_per_sec)
            .min(self.capacity);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Duration::ZERO
        } else {
            let wait = (1.0 - self.tokens) / self.refill_per_sec;
            self.tokens -= 1.0;
            Duration::from_secs_f64(wait)
        }
    }
}

/// Provider registry with retries, rate limiting and optional replay cache.
pub struct Gateway {
    providers: HashMap<String, Arc<dyn Provider>>,
    limiters: Mutex<HashMap<String, TokenBucket>>,
    retry: RetryPolicy,
    rate_per_sec: f64,
    cache: Option<ReplayCache>,
    live_calls: std::sync::atomic::AtomicU64,
}

impl Gateway {
    pub fn new(retry: RetryPolicy, rate_per_sec: f64) -> Self {
        Self {
            providers: HashMap::new(),
            limiters: Mutex::new(HashMap::new()),
            retry,
            rate_per_sec,
            cache: None,
            live_calls: std::sync::atomic::AtomicU64::new(0),
        }
    }

    pub fn with_provider(mut self, id: &str, provider: Arc<dyn Provider>) -> Self {
        self.providers.insert(id.to_string(), provider);
        self
    }

    pub fn with_cache(mut self, cache: ReplayCache) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Number of live (non-cached) provider calls made so far.
    pub fn live_call_count(&self) -> u64 {
        self.live_calls.load(std::sync::atomic::Ordering::SeqCst)
    }

    fn provider(&self, id: &str) -> Result<&Arc<dyn Provider>, GatewayError> {
        self.providers
            .get(id)
            .ok_or_else(|| GatewayError::UnknownProvider(id.to_string()))
    }

    fn throttle(&self, provider_id: &str) {
        let delay = {
            let mut limiters = self.limiters.lock();
            limiters
                .entry(provider_id.to_string())
                .or_insert_with(|| TokenBucket::new(self.rate_per_sec))
                .acquire_delay()
        };
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }

    /// Run `attempt` under the retry policy. Returns the result together
    /// with the number of attempts made.
    fn with_retry<T>(
        &self,
        provider_id: &str,
        mut attempt: impl FnMut() -> Result<T, ProviderFailure>,
    ) -> Result<(T, u32), GatewayError> {
        let mut attempts = 0;
        loop {
            self.throttle(provider_id);
            attempts += 1;
            self.live_calls
                .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            match attempt() {
                Ok(value) => return Ok((value, attempts)),
                Err(ProviderFailure::Fatal(err)) => return Err(err),
                Err(ProviderFailure::Retryable(_)) if attempts < self.retry.max_attempts => {
                    std::thread::sleep(self.retry.base_backoff * 2u32.pow(attempts - 1));
                }
                Err(ProviderFailure::Retryable(_)) => {
                    return Err(GatewayError::RateLimited { attempts });
                }
            }
        }
    }

    fn chat_live(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let provider = Arc::clone(self.provider(&request.provider_id)?);
        let (text, _) = self.with_retry(&request.provider_id, || provider.chat_once(request))?;
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        Ok(text)
    }
}

impl ChatBackend for Gateway {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        match &self.cache {
            Some(cache) => {
                let key = cache_key("chat", request);
                cache.cached_call(&key, || self.chat_live(request))
            }
            None => self.chat_live(request),
        }
    }
}

impl EmbedBackend for Gateway {
    fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
        request.validate()?;
        let run = || -> Result<Vec<Vec<f64>>, GatewayError> {
            let provider = Arc::clone(self.provider(&request.provider_id)?);
            let (vectors, _) =
                self.with_retry(&request.provider_id, || provider.embed_once(request))?;
            if vectors.len() != request.texts.len() {
                return Err(GatewayError::Provider(format!(
                    "expected {} vectors, got {}",
                    request.texts.len(),
                    vectors.len()
                )));
            }
            let dim = vectors[0].len();
            for v in &vectors {
                if v.len() != dim {
                    return Err(GatewayError::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
            }
            Ok(vectors)
        };
        match &self.cache {
            Some(cache) => {
                let key = cache_key("embed", request);
                let payload = cache.cached_call(&key, || {
                    run().map(|v| serde_json::to_string(&v).expect("vectors serialize"))
                })?;
                serde_json::from_str(&payload).map_err(|e| GatewayError::CacheCorrupt {
                    key,
                    reason: e.to_string(),
                })
            }
            None => run(),
        }
    }
}

//! Deterministic in-process providers used by unit and integration tests.

use super::{ChatRequest, EmbedRequest, GatewayError, Provider, ProviderFailure};
use parking_lot::Mutex;
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicU32, Ordering};

/// Replies with the user prompt verbatim.
pub struct EchoProvider;

impl Provider for EchoProvider {
    fn chat_once(&self, request: &ChatRequest) -> Result<String, ProviderFailure> {
        Ok(request.user_prompt.clone())
    }

    fn embed_once(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        UnitEmbedProvider::new(8).embed_once(request)
    }
}

/// Plays back a fixed script of outcomes, one per call. `Err(msg)` entries
/// are retryable failures; running off the end of the script repeats the
/// last entry.
pub struct ScriptedProvider {
    script: Vec<Result<String, String>>,
    cursor: Mutex<usize>,
}

impl ScriptedProvider {
    pub fn new(script: Vec<Result<String, String>>) -> Self {
        assert!(!script.is_empty());
        Self {
            script,
            cursor: Mutex::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        *self.cursor.lock()
    }
}

impl Provider for ScriptedProvider {
    fn chat_once(&self, _request: &ChatRequest) -> Result<String, ProviderFailure> {
        let mut cursor = self.cursor.lock();
        let step = self.script[(*cursor).min(self.script.len() - 1)].clone();
        *cursor += 1;
        step.map_err(ProviderFailure::Retryable)
    }

    fn embed_once(&self, _request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        Err(ProviderFailure::Fatal(GatewayError::Provider(
            "scripted provider has no embeddings".into(),
        )))
    }
}

/// Counts calls and always fails the same way.
pub struct CountingProvider {
    count: AtomicU32,
    auth_failure: bool,
}

impl CountingProvider {
    pub fn fatal_auth() -> Self {
        Self {
            count: AtomicU32::new(0),
            auth_failure: true,
        }
    }

    pub fn count(&self) -> u32 {
        self.count.load(Ordering::SeqCst)
    }
}

impl Provider for CountingProvider {
    fn chat_once(&self, request: &ChatRequest) -> Result<String, ProviderFailure> {
        self.count.fetch_add(1, Ordering::SeqCst);
        if self.auth_failure {
            Err(ProviderFailure::Fatal(GatewayError::Auth(
                request.provider_id.clone(),
            )))
        } else {
            Err(ProviderFailure::Retryable("scripted 429".into()))
        }
    }

    fn embed_once(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        self.count.fetch_add(1, Ordering::SeqCst);
        Err(ProviderFailure::Fatal(GatewayError::Auth(
            request.provider_id.clone(),
        )))
    }
}

/// Maps each text to a deterministic unit vector derived from its SHA-256.
pub struct UnitEmbedProvider {
    dim: usize,
}

impl UnitEmbedProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2);
        Self { dim }
    }

    pub fn vector_for(&self, text: &str) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.dim);
        let mut counter = 0u64;
        while values.len() < self.dim {
            let mut hasher = Sha256::new();
            hasher.update(text.as_bytes());
            hasher.update(counter.to_le_bytes());
            let digest = hasher.finalize();
            for chunk in digest.chunks_exact(8) {
                if values.len() == self.dim {
                    break;
                }
                let raw = u64::from_le_bytes(chunk.try_into().unwrap());
                values.push((raw as f64 / u64::MAX as f64) * 2.0 - 1.0);
            }
            counter += 1;
        }
        let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        values.iter().map(|x| x / norm).collect()
    }
}

impl Provider for UnitEmbedProvider {
    fn chat_once(&self, _request: &ChatRequest) -> Result<String, ProviderFailure> {
        Err(ProviderFailure::Fatal(GatewayError::Provider(
            "embed-only provider".into(),
        )))
    }

    fn embed_once(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, ProviderFailure> {
        Ok(request.texts.iter().map(|t| self.vector_for(t)).collect())
    }
}

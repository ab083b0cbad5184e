//! Write-once record/replay cache for provider calls.
//!
//! Cache keys are the SHA-256 of the canonical JSON serialization of the
//! request prefixed with the call kind, so any change to any request field
//! yields a different key. Entries are plain files whose content is the raw
//! response payload. Writes are first-wins: once a key exists its content
//! is never replaced, and concurrent callers of the same key are serialized
//! in-process so exactly one live call is made.

use super::GatewayError;
use parking_lot::Mutex;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Hex SHA-256 key for a request, namespaced by call kind.
pub fn cache_key<T: Serialize>(kind: &str, request: &T) -> String {
    let canonical = serde_json::to_string(request).expect("request serializes");
    let mut hasher = Sha256::new();
    hasher.update(kind.as_bytes());
    hasher.update(b"\n");
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

/// Filesystem-backed response cache with per-key in-process locking.
pub struct ReplayCache {
    dir: PathBuf,
    /// If true, a cache miss is an error instead of a live call.
    replay_only: bool,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ReplayCache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, GatewayError> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
            replay_only: false,
            key_locks: Mutex::new(HashMap::new()),
        })
    }

    /// Fail on cache misses instead of falling through to the provider.
    pub fn replay_only(mut self) -> Self {
        self.replay_only = true;
        self
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.path_for(key).exists()
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        let mut locks = self.key_locks.lock();
        Arc::clone(locks.entry(key.to_string()).or_default())
    }

    /// Return the cached payload for `key`, calling `live` on a miss and
    /// recording its result. Concurrent callers of the same key block until
    /// the first finishes, then read its entry.
    pub fn cached_call(
        &self,
        key: &str,
        live: impl FnOnce() -> Result<String, GatewayError>,
    ) -> Result<String, GatewayError> {
        let lock = self.key_lock(key);
        let _guard = lock.lock();
        let path = self.path_for(key);
        if path.exists() {
            let payload = std::fs::read_to_string(&path)?;
            if payload.is_empty() {
                return Err(GatewayError::CacheCorrupt {
                    key: key.to_string(),
                    reason: "empty cache file".into(),
                });
            }
            return Ok(payload);
        }
        if self.replay_only {
            return Err(GatewayError::Provider(format!(
                "cache miss for key {key} in replay-only mode"
            )));
        }
        let payload = live()?;
        // First-wins write: go through a temp file and link it into place
        // so a concurrent external writer can never leave a partial entry.
        let tmp = self.dir.join(format!(".{key}.tmp.{}", std::process::id()));
        std::fs::write(&tmp, &payload)?;
        match std::fs::hard_link(&tmp, &path) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {}
            Err(e) => {
                let _ = std::fs::remove_file(&tmp);
                return Err(e.into());
            }
        }
        let _ = std::fs::remove_file(&tmp);
        std::fs::read_to_string(&path).map_err(Into::into)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatRequest;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn request(user: &str) -> ChatRequest {
        ChatRequest {
            provider_id: "p".into(),
            model: "m".into(),
            system_prompt: "s".into(),
            user_prompt: user.into(),
            max_output_tokens: 10,
            temperature: 0.0,
            seed: None,
        }
    }

    #[test]
    fn key_changes_with_any_field() {
        let base = request("hello");
        let mut other = request("hello");
        other.temperature = 0.1;
        assert_ne!(cache_key("chat", &base), cache_key("chat", &other));
        assert_ne!(cache_key("chat", &base), cache_key("embed", &base));
        let mut seeded = request("hello");
        seeded.seed = Some(3);
        assert_ne!(cache_key("chat", &base), cache_key("chat", &seeded));
        assert_eq!(cache_key("chat", &base), cache_key("chat", &request("hello")));
    }

    #[test]
    fn second_call_replays_without_live_call() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::new(dir.path()).unwrap();
        let calls = AtomicU32::new(0);
        let live = || {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok("payload".to_string())
        };
        assert_eq!(cache.cached_call("k1", live).unwrap(), "payload");
        assert_eq!(
            cache
                .cached_call("k1", || panic!("must not be called"))
                .unwrap(),
            "payload"
        );
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn first_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::new(dir.path()).unwrap();
        cache.cached_call("k", || Ok("first".into())).unwrap();
        std::fs::remove_file(dir.path().join("k")).unwrap();
        let cache2 = ReplayCache::new(dir.path()).unwrap();
        cache2.cached_call("k", || Ok("second".into())).unwrap();
        assert_eq!(cache2.cached_call("k", || Ok("third".into())).unwrap(), "second");
    }

    #[test]
    fn replay_only_miss_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::new(dir.path()).unwrap().replay_only();
        assert!(cache.cached_call("nope", || Ok("x".into())).is_err());
    }

    #[test]
    fn concurrent_same_key_makes_one_live_call() {
        let dir = tempfile::tempdir().unwrap();
        let cache = std::sync::Arc::new(ReplayCache::new(dir.path()).unwrap());
        let calls = std::sync::Arc::new(AtomicU32::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let cache = std::sync::Arc::clone(&cache);
            let calls = std::sync::Arc::clone(&calls);
            handles.push(std::thread::spawn(move || {
                cache
                    .cached_call("shared", || {
                        calls.fetch_add(1, Ordering::SeqCst);
                        std::thread::sleep(std::time::Duration::from_millis(20));
                        Ok("value".to_string())
                    })
                    .unwrap()
            }));
        }
        for h in handles {
            assert_eq!(h.join().unwrap(), "value");
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }
}

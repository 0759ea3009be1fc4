//! Content-addressed response cache.
//!
//! Every upstream response is stored under a digest of the full request
//! identity: provider kind, endpoint, model, prompt, and payload. Entries are
//! immutable once written; a re-run that issues the same request hits the
//! file and never touches the network.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ProviderError, ProviderKind};

/// Digest identifying one request. Hex-encoded SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    /// Hashes the request identity. The payload is serialized with sorted
    /// object keys, so two maps with the same entries produce the same key.
    pub fn compute(
        kind: ProviderKind,
        endpoint: &str,
        model: &str,
        system_prompt: Option<&str>,
        payload: &serde_json::Value,
    ) -> CacheKey {
        let identity = serde_json::json!({
            "endpoint": endpoint,
            "kind": kind.as_str(),
            "model": model,
            "payload": payload,
            "system_prompt": system_prompt,
        });
        let bytes = serde_json::to_vec(&identity).expect("request identity serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        CacheKey(format!("{:x}", hasher.finalize()))
    }

    pub fn as_hex(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    created_at: u64,
    response: serde_json::Value,
}

/// On-disk cache rooted at one directory, one file per response.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Cache {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `<root>/<kind>/<first two hex chars>/<digest>.json`
    pub fn entry_path(&self, kind: ProviderKind, key: &CacheKey) -> PathBuf {
        self.root
            .join(kind.as_str())
            .join(&key.as_hex()[..2])
            .join(format!("{}.json", key.as_hex()))
    }

    /// Returns the stored response, or `None` on a miss. A file that exists
    /// but does not parse is reported as an error, not silently re-fetched.
    pub fn get(
        &self,
        kind: ProviderKind,
        key: &CacheKey,
    ) -> Result<Option<serde_json::Value>, ProviderError> {
        let path = self.entry_path(kind, key);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(err) => return Err(cache_error(&path, err.to_string())),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|err| cache_error(&path, format!("corrupt entry: {err}")))?;
        if entry.key != key.as_hex() {
            return Err(cache_error(
                &path,
                format!("entry records key {}, expected {}", entry.key, key.as_hex()),
            ));
        }
        Ok(Some(entry.response))
    }

    /// Stores a response. Existing entries are immutable: a second put for
    /// the same key leaves the original file untouched.
    pub fn put(
        &self,
        kind: ProviderKind,
        key: &CacheKey,
        response: &serde_json::Value,
    ) -> Result<(), ProviderError> {
        let path = self.entry_path(kind, key);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("entry path has a parent");
        fs::create_dir_all(dir).map_err(|err| cache_error(dir, err.to_string()))?;
        let entry = CacheEntry {
            key: key.as_hex().to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            response: response.clone(),
        };
        let body = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        // Write-then-rename keeps concurrent writers of the same key safe:
        // both produce identical content and the rename is atomic.
        let tmp = dir.join(format!(
            ".{}.{}.tmp",
            key.as_hex(),
            std::process::id()
        ));
        fs::write(&tmp, &body).map_err(|err| cache_error(&tmp, err.to_string()))?;
        fs::rename(&tmp, &path).map_err(|err| cache_error(&path, err.to_string()))?;
        Ok(())
    }
}

fn cache_error(path: &Path, message: String) -> ProviderError {
    ProviderError::Cache {
        path: path.display().to_string(),
        message,
    }
}

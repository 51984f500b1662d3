//! Content-addressed response cache: `<root>/<first-2-hex>/<digest>.json`.

use super::{ModelConfig, ModelError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// SHA-256 over the model id, the request parameters and the prompt.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse(hex_digest: &str) -> Option<CacheKey> {
        (hex_digest.len() == 64
            && hex_digest
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)))
        .then(|| CacheKey(hex_digest.to_string()))
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shortest round-trip decimal form, so `0.2` and `0.20` agree and whole
/// numbers carry no fractional part.
pub fn canonical_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

/// The cache-relevant part of a request. Transport settings (endpoint,
/// timeouts, credentials) are deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRequest {
    pub model_id: String,
    pub params: RequestParams,
    pub prompt: String,
}

impl CanonicalRequest {
    pub fn new(config: &ModelConfig, prompt: &str) -> Self {
        CanonicalRequest {
            model_id: config.model_id.clone(),
            params: RequestParams {
                max_tokens: config.max_tokens,
                temperature: config.temperature,
            },
            prompt: prompt.to_string(),
        }
    }

    pub fn key(&self) -> CacheKey {
        // parameter names in sorted order; every field length-prefixed
        let params = [
            ("max_tokens", self.params.max_tokens.to_string()),
            ("temperature", canonical_number(self.params.temperature)),
        ];
        let mut hasher = Sha256::new();
        let mut field = |name: &str, value: &str| {
            hasher.update(format!("{name}:{}:", value.len()));
            hasher.update(value.as_bytes());
            hasher.update(b"\n");
        };
        field("model_id", &self.model_id);
        for (name, value) in &params {
            field(name, value);
        }
        field("prompt", &self.prompt);
        CacheKey(hex::encode(hasher.finalize()))
    }
}

pub fn cache_key(config: &ModelConfig, prompt: &str) -> CacheKey {
    CanonicalRequest::new(config, prompt).key()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: CanonicalRequest,
    /// The provider's response body, unmodified.
    pub response: serde_json::Value,
    pub created_at: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(&key.as_str()[..2])
            .join(format!("{key}.json"))
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<CacheEntry>, ModelError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| cache_err(&path, e))
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.path_for(key).is_file()
    }

    /// Writes the entry through a temporary file and a rename, so readers
    /// never observe a partial entry.
    pub fn put(&self, entry: &CacheEntry) -> Result<CacheKey, ModelError> {
        let key = entry.request.key();
        let path = self.path_for(&key);
        let dir = path.parent().expect("entry path has a parent");
        fs::create_dir_all(dir).map_err(|e| cache_err(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| cache_err(dir, e))?;
        let json = serde_json::to_vec_pretty(entry).map_err(|e| cache_err(&path, e))?;
        tmp.write_all(&json).map_err(|e| cache_err(&path, e))?;
        tmp.write_all(b"\n").map_err(|e| cache_err(&path, e))?;
        tmp.persist(&path).map_err(|e| cache_err(&path, e.error))?;
        Ok(key)
    }

    /// All keys present on disk, sorted.
    pub fn keys(&self) -> Result<Vec<CacheKey>, ModelError> {
        let mut keys = Vec::new();
        let shards = match fs::read_dir(&self.root) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(keys),
            Err(e) => return Err(cache_err(&self.root, e)),
        };
        for shard in shards {
            let shard = shard.map_err(|e| cache_err(&self.root, e))?.path();
            if !shard.is_dir() {
                continue;
            }
            for file in fs::read_dir(&shard).map_err(|e| cache_err(&shard, e))? {
                let name = file.map_err(|e| cache_err(&shard, e))?.file_name();
                let name = name.to_string_lossy();
                if let Some(key) = name.strip_suffix(".json").and_then(CacheKey::parse) {
                    keys.push(key);
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    /// Keys whose stored request no longer hashes to the file name, or
    /// whose file fails to parse.
    pub fn verify(&self) -> Result<Vec<(CacheKey, String)>, ModelError> {
        let mut bad = Vec::new();
        for key in self.keys()? {
            match self.get(&key) {
                Ok(Some(entry)) => {
                    let actual = entry.request.key();
                    if actual != key {
                        bad.push((key, format!("request hashes to {actual}")));
                    }
                }
                Ok(None) => bad.push((key, "vanished".into())),
                Err(e) => bad.push((key, e.to_string())),
            }
        }
        Ok(bad)
    }
}

fn cache_err(path: &Path, e: impl fmt::Display) -> ModelError {
    ModelError::Cache {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BackendKind, ChatExchange, ChatRequest, ChatResponse, GatewayError};

/// On-disk record of one exchange. Layout: `<root>/<key[0..2]>/<key>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub run_index: u32,
    pub request: ChatRequest,
    pub response: ChatResponse,
    /// Backend that originally produced the response.
    pub origin: BackendKind,
    pub timestamp: String,
}

impl CacheEntry {
    pub fn from_exchange(ex: &ChatExchange) -> Self {
        CacheEntry {
            key: ex.key.clone(),
            model_id: ex.model_id.clone(),
            run_index: ex.run_index,
            request: ex.request.clone(),
            response: ex.response.clone(),
            origin: ex.backend,
            timestamp: ex.timestamp.clone(),
        }
    }
}

/// Append-only content-addressed store. Existing entries are never rewritten.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

fn cache_err(path: &Path, e: impl std::fmt::Display) -> GatewayError {
    GatewayError::Cache { path: path.display().to_string(), message: e.to_string() }
}

impl ResponseCache {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| cache_err(&root, e))?;
        Ok(ResponseCache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.root.join(shard).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        let path = self.path_for(key);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| cache_err(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(cache_err(&path, e)),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.path_for(key).is_file()
    }

    /// Writes atomically via a temporary file; a no-op if the key already exists.
    pub fn put(&self, entry: &CacheEntry) -> Result<(), GatewayError> {
        let path = self.path_for(&entry.key);
        if path.exists() {
            return Ok(());
        }
        let dir = path.parent().expect("cache path has a shard directory");
        fs::create_dir_all(dir).map_err(|e| cache_err(dir, e))?;
        let tmp = dir.join(format!(".{}.{}.tmp", entry.key, std::process::id()));
        let body = serde_json::to_string_pretty(entry).map_err(|e| cache_err(&path, e))?;
        let mut f = fs::File::create(&tmp).map_err(|e| cache_err(&tmp, e))?;
        f.write_all(body.as_bytes()).map_err(|e| cache_err(&tmp, e))?;
        f.sync_all().map_err(|e| cache_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| cache_err(&path, e))
    }

    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.root) else { return 0 };
        shards
            .flatten()
            .filter(|d| d.path().is_dir())
            .map(|d| {
                fs::read_dir(d.path())
                    .map(|it| it.flatten().filter(|f| f.path().extension().is_some_and(|x| x == "json")).count())
                    .unwrap_or(0)
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Sampling;
    use crate::strategy::Phase;

    fn entry(key: &str, text: &str) -> CacheEntry {
        CacheEntry {
            key: key.into(),
            model_id: "m".into(),
            run_index: 0,
            request: ChatRequest { system_instruction: "s".into(), user_message: "u".into(), phase: Phase::Decision, sampling: Sampling::default() },
            response: ChatResponse { text: text.into(), prompt_tokens: 1, completion_tokens: 2 },
            origin: BackendKind::Stub,
            timestamp: "2026-01-01T00:00:00.000Z".into(),
        }
    }

    #[test]
    fn sharded_layout_and_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        assert!(cache.get("abcdef").unwrap().is_none());
        cache.put(&entry("abcdef", "first")).unwrap();
        assert!(dir.path().join("ab").join("abcdef.json").is_file());
        cache.put(&entry("abcdef", "second")).unwrap();
        assert_eq!(cache.get("abcdef").unwrap().unwrap().response.text, "first");
        assert_eq!(cache.len(), 1);
    }
}

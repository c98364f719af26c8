use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use super::VideoChunk;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("duplicate key: {0} is write-once")]
    Duplicate(String),
    #[error("invalid storage key {0:?}")]
    InvalidKey(String),
    #[error("corrupt metadata for {key}: {source}")]
    Metadata { key: String, source: serde_json::Error },
    #[error("storage I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Write-once blob storage for chunks.
///
/// Implementations must allow concurrent writers on distinct keys.
pub trait ChunkStore: Send + Sync {
    fn put(&self, key: &str, bytes: &[u8], meta: &VideoChunk) -> Result<(), StoreError>;
    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError>;
    fn metadata(&self, key: &str) -> Result<VideoChunk, StoreError>;
    /// Keys with the given prefix in ascending order.
    fn list(&self, prefix: &str) -> Result<Vec<String>, StoreError>;
}

/// Stores `bytes` under `chunk.storage_key` and returns the key.
pub fn put_chunk(store: &dyn ChunkStore, chunk: &VideoChunk, bytes: &[u8]) -> Result<String, StoreError> {
    store.put(&chunk.storage_key, bytes, chunk)?;
    Ok(chunk.storage_key.clone())
}

pub fn get_chunk(store: &dyn ChunkStore, key: &str) -> Result<Vec<u8>, StoreError> {
    store.get(key)
}

fn check_key(key: &str) -> Result<(), StoreError> {
    let ok = !key.is_empty()
        && !key.starts_with('/')
        && key.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..")
        && key.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '/'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidKey(key.to_string()))
    }
}

/// In-process store, used by tests and single-binary simulations.
type Entries = BTreeMap<String, (Arc<Vec<u8>>, VideoChunk)>;

#[derive(Default)]
pub struct MemoryChunkStore {
    entries: RwLock<Entries>,
}

impl MemoryChunkStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ChunkStore for MemoryChunkStore {
    fn put(&self, key: &str, bytes: &[u8], meta: &VideoChunk) -> Result<(), StoreError> {
        check_key(key)?;
        let mut entries = self.entries.write().unwrap();
        if entries.contains_key(key) {
            return Err(StoreError::Duplicate(key.to_string()));
        }
        entries.insert(key.to_string(), (Arc::new(bytes.to_vec()), meta.clone()));
        Ok(())
    }

    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError> {
        let entries = self.entries.read().unwrap();
        entries.get(key).map(|(b, _)| b.as_ref().clone()).ok_or_else(|| StoreError::NotFound(key.to_string()))
    }

    fn metadata(&self, key: &str) -> Result<VideoChunk, StoreError> {
        let entries = self.entries.read().unwrap();
        entries.get(key).map(|(_, m)| m.clone()).ok_or_else(|| StoreError::NotFound(key.to_string()))
    }

    fn list(&self, prefix: &str) -> Result<Vec<String>, StoreError> {
        let entries = self.entries.read().unwrap();
        Ok(entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect())
    }
}

/// Directory-backed store. Each key maps to a file under `root`, with the
/// chunk metadata in a `.meta.json` sidecar.
pub struct FsChunkStore {
    root: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl FsChunkStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(FsChunkStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join(key)
    }

    fn meta_path(&self, key: &str) -> PathBuf {
        self.root.join(format!("{key}.meta.json"))
    }

    // Publishes via hard_link, which fails if the target exists, so a key
    // is never observed half-written and never overwritten.
    fn write_once(&self, target: &Path, bytes: &[u8], key: &str) -> Result<(), StoreError> {
        let dir = target.parent().expect("keys are relative to root");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::hard_link(&tmp, target)
        })();
        let _ = fs::remove_file(&tmp);
        match result {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(StoreError::Duplicate(key.to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

impl ChunkStore for FsChunkStore {
    fn put(&self, key: &str, bytes: &[u8], meta: &VideoChunk) -> Result<(), StoreError> {
        check_key(key)?;
        if key.ends_with(".meta.json") {
            return Err(StoreError::InvalidKey(key.to_string()));
        }
        let meta_json = serde_json::to_vec_pretty(meta)
            .map_err(|source| StoreError::Metadata { key: key.to_string(), source })?;
        self.write_once(&self.path(key), bytes, key)?;
        self.write_once(&self.meta_path(key), &meta_json, key)
    }

    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError> {
        check_key(key)?;
        fs::read(self.path(key)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(key.to_string()),
            _ => e.into(),
        })
    }

    fn metadata(&self, key: &str) -> Result<VideoChunk, StoreError> {
        check_key(key)?;
        let raw = fs::read(self.meta_path(key)).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::NotFound(key.to_string()),
            _ => e.into(),
        })?;
        serde_json::from_slice(&raw).map_err(|source| StoreError::Metadata { key: key.to_string(), source })
    }

    fn list(&self, prefix: &str) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        collect_keys(&self.root, &self.root, &mut out)?;
        out.retain(|k| k.starts_with(prefix));
        out.sort();
        Ok(out)
    }
}

fn collect_keys(root: &Path, dir: &Path, out: &mut Vec<String>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_keys(root, &path, out)?;
            continue;
        }
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.starts_with(".tmp-") || name.ends_with(".meta.json") {
            continue;
        }
        let rel = path.strip_prefix(root).expect("under root");
        out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
    }
    Ok(())
}

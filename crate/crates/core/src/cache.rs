//! Content-addressed result cache and atomic file writes.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;

/// Bumped whenever cached numerical results could change meaning.
pub const CACHE_VERSION: &str = concat!("homlab-", env!("CARGO_PKG_VERSION"), "-c1");

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Digest of the exact bit patterns of a float array.
pub fn digest_f64(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over
/// `path`, so readers see either the old content or the new, never a prefix.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Directory of JSON records keyed by the digest of a JSON key document.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn key(kind: &str, key: &serde_json::Value) -> String {
        let doc = serde_json::json!({ "kind": kind, "version": CACHE_VERSION, "key": key });
        digest_bytes(doc.to_string().as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Returns the stored value, ignoring unreadable or stale entries.
    pub fn get(&self, key: &str) -> Option<serde_json::Value> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let v: serde_json::Value = serde_json::from_str(&text).ok()?;
        if v.get("version")?.as_str()? != CACHE_VERSION {
            return None;
        }
        v.get("value").cloned()
    }

    pub fn put(&self, key: &str, value: &serde_json::Value) -> Result<()> {
        let doc = serde_json::json!({ "version": CACHE_VERSION, "value": value });
        let text = serde_json::to_string_pretty(&doc).expect("json values serialize");
        atomic_write(&self.path(key), text.as_bytes())
    }
}

//! Single-document JSON store and the append-only event log.

mod log;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::AgreementInstance;

pub use log::{read_log, replay, EventLog, EventRecord, ReplayError};

pub const STORE_VERSION: u32 = 1;
pub const DEFAULT_STORE: &str = "db.json";

/// Everything persisted about all paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreDocument {
    pub version: u32,
    /// Next id counter per path.
    pub id_counters: BTreeMap<String, u64>,
    /// path name -> agreement id -> instance
    pub agreements: BTreeMap<String, BTreeMap<String, AgreementInstance>>,
}

impl Default for StoreDocument {
    fn default() -> Self {
        Self {
            version: STORE_VERSION,
            id_counters: BTreeMap::new(),
            agreements: BTreeMap::new(),
        }
    }
}

impl StoreDocument {
    /// Sorted-key, pretty-printed UTF-8 JSON with a trailing newline.
    pub fn to_bytes(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("store documents always serialize");
        let mut out = serde_json::to_vec_pretty(&value).expect("values always serialize");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)
            .map_err(|e| StoreError::CorruptDocument(e.to_string()))?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(STORE_VERSION) => {}
            Some(v) => return Err(StoreError::UnsupportedVersion(v)),
            None => return Err(StoreError::CorruptDocument("missing version".into())),
        }
        serde_json::from_value(value).map_err(|e| StoreError::CorruptDocument(e.to_string()))
    }

    pub fn instance_count(&self) -> usize {
        self.agreements.values().map(BTreeMap::len).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("storage unavailable: {0}")]
    StorageUnavailable(#[from] io::Error),
    #[error("corrupt store document: {0}")]
    CorruptDocument(String),
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fault {
    None,
    BeforeRename,
}

/// Atomically replaces the document at `location` (write a sibling
/// temporary file, sync, rename over).
pub fn save(doc: &StoreDocument, location: &Path) -> Result<(), StoreError> {
    save_with(doc, location, Fault::None)
}

fn temp_path(location: &Path) -> PathBuf {
    let mut name = location
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| DEFAULT_STORE.into());
    name.push(".tmp");
    location.with_file_name(name)
}

fn save_with(doc: &StoreDocument, location: &Path, fault: Fault) -> Result<(), StoreError> {
    let tmp = temp_path(location);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(&doc.to_bytes())?;
        f.sync_all()?;
    }
    if fault == Fault::BeforeRename {
        return Err(StoreError::StorageUnavailable(io::Error::other(
            "interrupted before rename",
        )));
    }
    fs::rename(&tmp, location)?;
    Ok(())
}

/// Missing file yields a fresh empty document.
pub fn load(location: &Path) -> Result<StoreDocument, StoreError> {
    match fs::read(location) {
        Ok(bytes) => StoreDocument::from_bytes(&bytes),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(StoreDocument::default()),
        Err(e) => Err(e.into()),
    }
}

/// Sidecar event-log location for a store: `db.json` -> `db.events.jsonl`.
pub fn default_log_path(store: &Path) -> PathBuf {
    let stem = store
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "db".into());
    store.with_file_name(format!("{stem}.events.jsonl"))
}

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{DispatchOutcome, Disposition, Engine, EngineError};
use crate::model::{canonical_json, AgreementId, InputEnvelope};

use super::{StoreDocument, StoreError};

/// One dispatched envelope and what became of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub path_name: String,
    pub envelope: InputEnvelope,
    pub disposition: Disposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement_id: Option<AgreementId>,
}

/// Newline-delimited JSON log, appended after every dispatch.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    next_seq: u64,
}

impl EventLog {
    /// Opens (or creates) the log, continuing after its last record.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let next_seq = match read_log(&path) {
            Ok(records) => records.last().map_or(0, |r| r.seq + 1),
            Err(StoreError::StorageUnavailable(e)) if e.kind() == io::ErrorKind::NotFound => 0,
            Err(e) => return Err(e),
        };
        Ok(Self { path, next_seq })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(
        &mut self,
        path_name: &str,
        envelope: &InputEnvelope,
        outcome: &DispatchOutcome,
    ) -> Result<EventRecord, StoreError> {
        let rec = EventRecord {
            seq: self.next_seq,
            path_name: path_name.to_string(),
            envelope: envelope.clone(),
            disposition: outcome.disposition,
            agreement_id: outcome.agreement_id.clone(),
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let mut line = canonical_json(&rec);
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        self.next_seq += 1;
        Ok(rec)
    }
}

pub fn read_log(path: &Path) -> Result<Vec<EventRecord>, StoreError> {
    let f = File::open(path)?;
    let mut out: Vec<EventRecord> = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| StoreError::CorruptDocument(format!("event log line {}: {e}", n + 1)))?;
        if out.last().is_some_and(|prev| prev.seq >= rec.seq) {
            return Err(StoreError::CorruptDocument(format!(
                "event log line {}: seq {} does not increase",
                n + 1,
                rec.seq
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("replay needs an empty registry")]
    NotEmpty,
    #[error(
        "replay diverged at event {seq}: log has {expected} {expected_id:?}, replay produced {actual} {actual_id:?}"
    )]
    ReplayDivergence {
        seq: u64,
        expected: &'static str,
        expected_id: Option<AgreementId>,
        actual: &'static str,
        actual_id: Option<AgreementId>,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Re-dispatches every logged envelope, in order, into `engine` (which must
/// have its paths registered and no agreements) and returns the resulting
/// document. Any disposition or agreement id that differs from the log is a
/// divergence.
pub fn replay(engine: &mut Engine, records: &[EventRecord]) -> Result<StoreDocument, ReplayError> {
    if engine.snapshot().instance_count() > 0 {
        return Err(ReplayError::NotEmpty);
    }
    for rec in records {
        let (disposition, id) = match engine.dispatch(&rec.path_name, &rec.envelope) {
            Ok(o) => (o.disposition, o.agreement_id),
            Err(e) if e.is_hook_failure() => (Disposition::Rejected, None),
            Err(e) => return Err(e.into()),
        };
        if disposition != rec.disposition || id != rec.agreement_id {
            return Err(ReplayError::ReplayDivergence {
                seq: rec.seq,
                expected: rec.disposition.as_str(),
                expected_id: rec.agreement_id.clone(),
                actual: disposition.as_str(),
                actual_id: id,
            });
        }
    }
    Ok(engine.snapshot())
}

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{AgreementId, DataModel, PathName, ProcessName, Timestamp};
use crate::stage::StagePayload;

use super::path::PathDefinition;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum InstanceStatus {
    Active { active_process: ProcessName },
    Terminated { outcome: String },
}

impl InstanceStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Active { .. } => "active",
            Self::Terminated { .. } => "terminated",
        }
    }
}

/// What caused a transition record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cause {
    /// An inbound envelope, identified by its digest.
    Envelope { digest: String },
    /// A directive returned from `on_activate`.
    Activation,
    /// An operator action taken outside any hook.
    Exit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub seq: u64,
    pub from_process: Option<ProcessName>,
    pub to_process: Option<ProcessName>,
    pub cause: Cause,
    pub payload: Option<StagePayload>,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementInstance {
    pub id: AgreementId,
    pub path_name: PathName,
    pub status: InstanceStatus,
    pub data_model: DataModel,
    pub history: Vec<TransitionRecord>,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalkViolation {
    #[error("history is empty")]
    Empty,
    #[error("record {index} has seq {seq}")]
    Sequence { index: usize, seq: u64 },
    #[error("walk does not start at the init process")]
    BadStart,
    #[error("record {0} does not continue from the previous one")]
    Broken(usize),
    #[error("records follow a termination")]
    AfterTermination,
    #[error("status does not agree with the last record")]
    StatusMismatch,
    #[error("record {0} follows an edge the path does not declare")]
    UndeclaredEdge(usize),
}

impl AgreementInstance {
    pub fn is_active(&self) -> bool {
        matches!(self.status, InstanceStatus::Active { .. })
    }

    pub fn active_process(&self) -> Option<&ProcessName> {
        match &self.status {
            InstanceStatus::Active { active_process } => Some(active_process),
            InstanceStatus::Terminated { .. } => None,
        }
    }

    pub fn outcome(&self) -> Option<&str> {
        match &self.status {
            InstanceStatus::Terminated { outcome } => Some(outcome),
            InstanceStatus::Active { .. } => None,
        }
    }

    pub fn is_in(&self, process: &str) -> bool {
        self.active_process().is_some_and(|p| p.as_str() == process)
    }

    pub fn model_set(&mut self, section: &str, key: &str, value: impl Into<Value>) {
        self.data_model.set(section, key, value);
    }

    pub fn model_get(&self, section: &str, key: &str) -> Option<&Value> {
        self.data_model.get(section, key)
    }

    /// Checks that the history reads as a walk from `init` that ends where
    /// the status says it does.
    pub fn validate_walk(&self, init: &ProcessName) -> Result<(), WalkViolation> {
        let first = self.history.first().ok_or(WalkViolation::Empty)?;
        if first.from_process.is_some() || first.to_process.as_ref() != Some(init) {
            return Err(WalkViolation::BadStart);
        }
        let mut at: Option<&ProcessName> = None;
        for (i, rec) in self.history.iter().enumerate() {
            if rec.seq != i as u64 {
                return Err(WalkViolation::Sequence {
                    index: i,
                    seq: rec.seq,
                });
            }
            if i > 0 {
                if at.is_none() {
                    return Err(WalkViolation::AfterTermination);
                }
                if rec.from_process.as_ref() != at {
                    return Err(WalkViolation::Broken(i));
                }
            }
            at = rec.to_process.as_ref();
        }
        let consistent = match &self.status {
            InstanceStatus::Active { active_process } => at == Some(active_process),
            InstanceStatus::Terminated { .. } => at.is_none(),
        };
        if consistent {
            Ok(())
        } else {
            Err(WalkViolation::StatusMismatch)
        }
    }

    /// [`validate_walk`](Self::validate_walk) plus: every transition follows
    /// a declared edge of `path`, and hook terminations only happen in
    /// processes that may terminate.
    pub fn validate_walk_on(&self, path: &PathDefinition) -> Result<(), WalkViolation> {
        self.validate_walk(path.init())?;
        let edges = path.edges();
        for (i, rec) in self.history.iter().enumerate().skip(1) {
            let Some(from) = &rec.from_process else {
                return Err(WalkViolation::Broken(i));
            };
            let ok = match &rec.to_process {
                Some(to) => edges.iter().any(|(a, b)| a == from && b == to),
                None => {
                    rec.cause == Cause::Exit
                        || path
                            .process(from.as_str())
                            .is_some_and(|p| p.contract.may_terminate)
                }
            };
            if !ok {
                return Err(WalkViolation::UndeclaredEdge(i));
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> InstanceSummary {
        InstanceSummary {
            id: self.id.clone(),
            status: self.status.label().to_string(),
            active_process: self.active_process().cloned(),
            outcome: self.outcome().map(str::to_string),
            created_at: self.created_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub id: AgreementId,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_process: Option<ProcessName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    pub created_at: Timestamp,
}

//! Reusable stage archetypes, transplant validation and the path lint.
//!
//! Archetypes come in two forms: a component struct (`ThresholdGate`,
//! `ConsensusGate`, ...) that hand-written processes embed, and a
//! `make_*` constructor returning a ready `ProcessDefinition`. Every
//! constructed process carries a [`StageArchetype`] record whose parameters
//! are a plain value tree, so the same process can be rebuilt from data.

mod approval;
mod consensus;
mod lint;
mod notifier;
mod recorder;
mod threshold;
mod transplant;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::ProcessDefinition;
use crate::model::ProcessName;

pub use approval::{make_approval_gate, Approval, ApprovalGate};
pub use consensus::{make_consensus_gate, normalize_verdict, ConsensusGate, ConsensusState};
pub use lint::{lint_path, LintFinding};
pub use notifier::{make_notifier, Channel, Notifier};
pub use recorder::{
    make_registration_recorder, make_registration_recorder_in, RegistrationRecorder,
    REGISTRATION_SECTION,
};
pub use threshold::{make_threshold_gate, GateStep, ThresholdGate, OUTCOME_INVALID};
pub use transplant::{transplant, TransplantError};

pub(crate) use threshold::contributors_in;

/// Model section where archetypes keep their working state.
pub const DATA_SECTION: &str = "data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchetypeKind {
    ThresholdGate,
    ApprovalGate,
    ConsensusGate,
    RegistrationRecorder,
    Notifier,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ArchetypeError {
    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),
    #[error("bad parameter `{0}`: {1}")]
    BadParameter(&'static str, String),
}

/// Which archetype a process was built from, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageArchetype {
    pub kind: ArchetypeKind,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
}

impl StageArchetype {
    pub fn new(kind: ArchetypeKind) -> Self {
        Self {
            kind,
            parameters: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    fn str_param(&self, key: &'static str) -> Result<&str, ArchetypeError> {
        self.parameters
            .get(key)
            .ok_or(ArchetypeError::MissingParameter(key))?
            .as_str()
            .ok_or_else(|| ArchetypeError::BadParameter(key, "expected a string".into()))
    }

    fn opt_str_param(&self, key: &'static str) -> Result<Option<&str>, ArchetypeError> {
        match self.parameters.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(_) => self.str_param(key).map(Some),
        }
    }

    fn process_param(&self, key: &'static str) -> Result<ProcessName, ArchetypeError> {
        ProcessName::new(self.str_param(key)?)
            .map_err(|e| ArchetypeError::BadParameter(key, e.to_string()))
    }

    fn opt_process_param(&self, key: &'static str) -> Result<Option<ProcessName>, ArchetypeError> {
        self.opt_str_param(key)?
            .map(|s| {
                ProcessName::new(s).map_err(|e| ArchetypeError::BadParameter(key, e.to_string()))
            })
            .transpose()
    }

    /// Builds the process described by this record.
    pub fn build(&self) -> Result<ProcessDefinition, ArchetypeError> {
        match self.kind {
            ArchetypeKind::ThresholdGate => {
                let threshold = self
                    .parameters
                    .get("threshold")
                    .ok_or(ArchetypeError::MissingParameter("threshold"))?
                    .as_i64()
                    .ok_or_else(|| {
                        ArchetypeError::BadParameter("threshold", "expected an integer".into())
                    })?;
                make_threshold_gate(
                    self.str_param("field")?,
                    threshold,
                    self.process_param("target")?,
                )
            }
            ArchetypeKind::ConsensusGate => {
                let verdicts: Vec<&str> = match self.parameters.get("verdicts") {
                    Some(Value::Array(a)) => a.iter().filter_map(Value::as_str).collect(),
                    _ => return Err(ArchetypeError::MissingParameter("verdicts")),
                };
                make_consensus_gate(
                    self.str_param("parties_field")?,
                    &verdicts,
                    self.process_param("agree_target")?,
                    self.process_param("disagree_target")?,
                )
            }
            ArchetypeKind::ApprovalGate => Ok(make_approval_gate(
                self.str_param("approver_key")?,
                self.process_param("accept_target")?,
                self.str_param("reject_outcome")?,
            )),
            ArchetypeKind::RegistrationRecorder => {
                let recorder = match self.opt_str_param("section")? {
                    Some(s) => RegistrationRecorder::with_section(s),
                    None => RegistrationRecorder::default(),
                };
                Ok(make_registration_recorder_in(
                    recorder,
                    self.opt_process_param("next")?,
                ))
            }
            ArchetypeKind::Notifier => {
                let channel = Channel::parse(self.str_param("channel")?).ok_or_else(|| {
                    ArchetypeError::BadParameter("channel", "expected status, dm or email".into())
                })?;
                make_notifier(
                    channel,
                    self.opt_str_param("address_key")?,
                    self.str_param("template")?,
                    self.opt_process_param("next")?,
                )
            }
        }
    }
}

/// Builds a process from a `{"kind": ..., "parameters": {...}}` tree and
/// names it `name`.
pub fn process_from_value(name: &str, value: Value) -> Result<ProcessDefinition, ArchetypeError> {
    let archetype: StageArchetype = serde_json::from_value(value)
        .map_err(|e| ArchetypeError::BadParameter("archetype", e.to_string()))?;
    let name =
        ProcessName::new(name).map_err(|e| ArchetypeError::BadParameter("name", e.to_string()))?;
    Ok(archetype.build()?.renamed(name))
}

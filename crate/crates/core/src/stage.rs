//! The six agreement stages and the record handed across process transitions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::Actor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageKind {
    Authoring,
    Registration,
    Execution,
    Appeal,
    Authentication,
    Enforcement,
}

impl StageKind {
    pub const ALL: [StageKind; 6] = [
        StageKind::Authoring,
        StageKind::Registration,
        StageKind::Execution,
        StageKind::Appeal,
        StageKind::Authentication,
        StageKind::Enforcement,
    ];
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Identity, content, parties and status of an agreement as known so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub identity: String,
    pub content_digest: String,
    pub parties: Vec<Actor>,
    pub status: String,
}

/// Standardized record passed along with every Transition and Terminate.
///
/// Field requirements are named with dotted paths (`summary.parties`,
/// `extras.essay_body`) so process contracts can be checked against a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePayload {
    pub agreement_ref: String,
    pub from_stage: StageKind,
    pub to_stage: StageKind,
    pub summary: Summary,
    #[serde(default)]
    pub extras: BTreeMap<String, Value>,
}

pub const AGREEMENT_REF: &str = "agreement_ref";
pub const SUMMARY_IDENTITY: &str = "summary.identity";
pub const SUMMARY_CONTENT: &str = "summary.content_digest";
pub const SUMMARY_PARTIES: &str = "summary.parties";
pub const SUMMARY_STATUS: &str = "summary.status";

/// The four summary fields, as contract names.
pub const SUMMARY_FIELDS: [&str; 4] = [
    SUMMARY_IDENTITY,
    SUMMARY_CONTENT,
    SUMMARY_PARTIES,
    SUMMARY_STATUS,
];

impl StagePayload {
    pub fn new(
        agreement_ref: impl Into<String>,
        from_stage: StageKind,
        to_stage: StageKind,
    ) -> Self {
        Self {
            agreement_ref: agreement_ref.into(),
            from_stage,
            to_stage,
            summary: Summary::default(),
            extras: BTreeMap::new(),
        }
    }

    pub fn with_summary(mut self, summary: Summary) -> Self {
        self.summary = summary;
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extras.insert(key.to_string(), value.into());
        self
    }

    /// Whether the named contract field carries a value.
    pub fn has_field(&self, field: &str) -> bool {
        match field {
            AGREEMENT_REF => !self.agreement_ref.is_empty(),
            SUMMARY_IDENTITY => !self.summary.identity.is_empty(),
            SUMMARY_CONTENT => !self.summary.content_digest.is_empty(),
            SUMMARY_PARTIES => !self.summary.parties.is_empty(),
            SUMMARY_STATUS => !self.summary.status.is_empty(),
            other => match other.strip_prefix("extras.") {
                Some(key) => self.extras.get(key).is_some_and(|v| !v.is_null()),
                None => false,
            },
        }
    }

    pub fn extra_str(&self, key: &str) -> Option<&str> {
        self.extras.get(key)?.as_str()
    }
}

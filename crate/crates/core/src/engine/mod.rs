//! Path, process, interface and instance model plus the dispatch loop:
//! filter, match, deliver, apply the directive.

mod driver;
mod instance;
mod path;
mod process;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use crate::model::InputEnvelope;
use crate::model::{AgreementId, EnvelopeError, PathName, ProcessName, Timestamp};
use crate::stage::StagePayload;
use crate::store::{StoreDocument, STORE_VERSION};

pub use driver::{Applied, DirectiveKind, Driver, MAX_ACTIVATION_HOPS};
pub use instance::{
    AgreementInstance, Cause, InstanceStatus, InstanceSummary, TransitionRecord, WalkViolation,
};
pub use path::{
    InterfaceDefinition, MatchResult, PathBuilder, PathDefinition, RegistryView,
    RESERVED_PATH_NAMES,
};
pub use process::{
    Contribution, Directive, Effect, EffectRejected, EffectSink, HookContext, HookError,
    HookResult, NullSink, ProcessBehavior, ProcessDefinition, ReceiveFn, StageContract,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("a path named {0} is already registered")]
    DuplicatePathName(String),
    #[error("invalid path definition: {0}")]
    InvalidDefinition(String),
    #[error("unknown path {0}")]
    UnknownPath(String),
    #[error("malformed envelope: {0}")]
    InvalidEnvelope(#[from] EnvelopeError),
    #[error("interface matched agreement {0}, which does not exist")]
    MatchedMissingInstance(AgreementId),
    #[error("unknown agreement {0}")]
    UnknownAgreement(AgreementId),
    #[error("unknown target process {0}")]
    UnknownTargetProcess(String),
    #[error("activation chain exceeded {0} hops")]
    ActivationLoopExceeded(usize),
    #[error("agreement is already terminated")]
    AlreadyTerminated,
    #[error("process {process}: {error}")]
    Hook { process: String, error: HookError },
    #[error("cannot restore store: {0}")]
    Restore(String),
}

impl EngineError {
    /// True for failures that leave the envelope unprocessed because the
    /// engine or a hook broke, as opposed to a refusal of the input.
    pub fn is_hook_failure(&self) -> bool {
        matches!(
            self,
            Self::Hook {
                error: HookError::Failed(_),
                ..
            } | Self::ActivationLoopExceeded(_)
                | Self::UnknownTargetProcess(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Created,
    Delivered,
    Rejected,
    IgnoredTerminated,
}

impl Disposition {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Created => "created",
            Self::Delivered => "delivered",
            Self::Rejected => "rejected",
            Self::IgnoredTerminated => "ignored_terminated",
        }
    }

    pub fn mutates(self) -> bool {
        matches!(self, Self::Created | Self::Delivered)
    }
}

/// Result of one dispatch; also the HTTP response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchOutcome {
    pub disposition: Disposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement_id: Option<AgreementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_process: Option<ProcessName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl DispatchOutcome {
    pub fn rejected(reason: impl Into<String>) -> Self {
        Self {
            disposition: Disposition::Rejected,
            agreement_id: None,
            status: None,
            active_process: None,
            outcome: None,
            reason: Some(reason.into()),
        }
    }

    fn about(disposition: Disposition, inst: &AgreementInstance) -> Self {
        Self {
            disposition,
            agreement_id: Some(inst.id.clone()),
            status: Some(inst.status.label().to_string()),
            active_process: inst.active_process().cloned(),
            outcome: inst.outcome().map(str::to_string),
            reason: None,
        }
    }
}

/// Issues `<path>-<counter>` ids. Counters start at `start` for every path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdGenerator {
    start: u64,
    next: BTreeMap<String, u64>,
}

impl Default for IdGenerator {
    fn default() -> Self {
        Self::starting_at(1)
    }
}

impl IdGenerator {
    pub fn starting_at(start: u64) -> Self {
        Self {
            start,
            next: BTreeMap::new(),
        }
    }

    fn peek(&self, path: &PathName) -> u64 {
        self.next.get(path.as_str()).copied().unwrap_or(self.start)
    }

    fn id_for(&self, path: &PathName) -> AgreementId {
        AgreementId(format!("{path}-{}", self.peek(path)))
    }

    fn advance(&mut self, path: &PathName) {
        let n = self.peek(path);
        self.next.insert(path.to_string(), n + 1);
    }
}

struct PathSlot {
    def: Arc<PathDefinition>,
    instances: BTreeMap<AgreementId, AgreementInstance>,
}

impl PathSlot {
    fn route(&self, env: &InputEnvelope) -> Option<(&InterfaceDefinition, MatchResult)> {
        let iface = self.def.interfaces().iter().find(|i| i.filter(env))?;
        let view = RegistryView::new(&self.instances);
        Some((iface, iface.matches(env, &view)))
    }
}

/// Registry of paths and their instances.
///
/// Callers serialize access (`&mut self` for every mutation); the server
/// keeps one engine behind a lock.
pub struct Engine {
    paths: BTreeMap<String, PathSlot>,
    ids: IdGenerator,
    sink: Arc<dyn EffectSink>,
    /// Instances of paths that are stored but not registered; carried
    /// through snapshots untouched.
    orphans: BTreeMap<String, BTreeMap<AgreementId, AgreementInstance>>,
}

impl Engine {
    pub fn new(sink: Arc<dyn EffectSink>) -> Self {
        Self::with_ids(sink, IdGenerator::default())
    }

    pub fn with_ids(sink: Arc<dyn EffectSink>, ids: IdGenerator) -> Self {
        Self {
            paths: BTreeMap::new(),
            ids,
            sink,
            orphans: BTreeMap::new(),
        }
    }

    pub fn register_path(
        &mut self,
        def: PathDefinition,
    ) -> Result<Arc<PathDefinition>, EngineError> {
        let name = def.name().to_string();
        if self.paths.contains_key(&name) {
            return Err(EngineError::DuplicatePathName(name));
        }
        let def = Arc::new(def);
        if let Some(bad) = self
            .orphans
            .get(&name)
            .and_then(|m| m.values().find(|i| !def.check_status(&i.status)))
        {
            return Err(EngineError::Restore(format!(
                "agreement {} sits in a process unknown to path {name}",
                bad.id
            )));
        }
        let instances = self.orphans.remove(&name).unwrap_or_default();
        self.paths.insert(
            name,
            PathSlot {
                def: Arc::clone(&def),
                instances,
            },
        );
        Ok(def)
    }

    pub fn path(&self, name: &str) -> Option<&Arc<PathDefinition>> {
        self.paths.get(name).map(|s| &s.def)
    }

    pub fn paths(&self) -> impl Iterator<Item = &Arc<PathDefinition>> {
        self.paths.values().map(|s| &s.def)
    }

    /// URL routes served for the registered paths.
    pub fn routing_table(&self) -> Vec<String> {
        self.paths.keys().map(|n| format!("/{n}")).collect()
    }

    pub fn instances(
        &self,
        path: &str,
    ) -> Result<impl Iterator<Item = &AgreementInstance>, EngineError> {
        let slot = self.slot(path)?;
        Ok(slot.instances.values())
    }

    pub fn instance(
        &self,
        path: &str,
        id: &AgreementId,
    ) -> Result<&AgreementInstance, EngineError> {
        self.slot(path)?
            .instances
            .get(id)
            .ok_or_else(|| EngineError::UnknownAgreement(id.clone()))
    }

    fn slot(&self, path: &str) -> Result<&PathSlot, EngineError> {
        self.paths
            .get(path)
            .ok_or_else(|| EngineError::UnknownPath(path.to_string()))
    }

    /// Runs the interfaces of `path` over `env` without delivering anything.
    pub fn preview(
        &self,
        path: &str,
        env: &InputEnvelope,
    ) -> Result<Option<(String, MatchResult)>, EngineError> {
        let slot = self.slot(path)?;
        Ok(slot.route(env).map(|(i, m)| (i.name.clone(), m)))
    }

    /// Routes `env` through the interfaces of `path` and applies the result.
    ///
    /// The first interface whose filter accepts the envelope decides; its
    /// match result is final. Every call yields exactly one disposition, and
    /// on any error the registry is left as it was.
    pub fn dispatch(
        &mut self,
        path: &str,
        env: &InputEnvelope,
    ) -> Result<DispatchOutcome, EngineError> {
        env.validate()?;
        let slot = self
            .paths
            .get(path)
            .ok_or_else(|| EngineError::UnknownPath(path.to_string()))?;
        let route = match slot.route(env) {
            None => {
                return Ok(DispatchOutcome::rejected(
                    "no interface accepts this envelope",
                ))
            }
            Some((_, route)) => route,
        };
        let driver = Driver::new(&slot.def);
        let (applied, disposition) = match route {
            MatchResult::Decline => {
                return Ok(DispatchOutcome::rejected("declined by interface"));
            }
            MatchResult::Existing(id) => {
                let inst = slot
                    .instances
                    .get(&id)
                    .ok_or_else(|| EngineError::MatchedMissingInstance(id.clone()))?;
                if !inst.is_active() {
                    return Ok(DispatchOutcome::about(Disposition::IgnoredTerminated, inst));
                }
                match driver.deliver(inst, env) {
                    Ok(applied) => (applied, Disposition::Delivered),
                    Err(e) => return refusal(e),
                }
            }
            MatchResult::New => {
                let id = self.ids.id_for(&slot.def.name().clone());
                let cause = Cause::Envelope {
                    digest: env.digest(),
                };
                let created = match driver.create(id, cause, env.received_at) {
                    Ok(c) => c,
                    Err(e) => return refusal(e),
                };
                let applied = if created.instance.is_active() {
                    match driver.deliver(&created.instance, env) {
                        Ok(mut delivered) => {
                            let mut effects = created.effects;
                            effects.append(&mut delivered.effects);
                            delivered.effects = effects;
                            delivered
                        }
                        Err(e) => return refusal(e),
                    }
                } else {
                    created
                };
                (applied, Disposition::Created)
            }
        };
        let inst = applied.instance;
        if let Err(e) = self.sink.commit(&inst.id, &applied.effects) {
            return Ok(DispatchOutcome::rejected(e.0));
        }
        if disposition == Disposition::Created {
            self.ids.advance(&inst.path_name);
        }
        let outcome = DispatchOutcome::about(disposition, &inst);
        let slot = self.paths.get_mut(path).expect("slot looked up above");
        slot.instances.insert(inst.id.clone(), inst);
        Ok(outcome)
    }

    /// Operator termination of an active agreement, outside any hook.
    pub fn terminate(
        &mut self,
        path: &str,
        id: &AgreementId,
        outcome: &str,
        at: Timestamp,
    ) -> Result<&AgreementInstance, EngineError> {
        let slot = self.slot(path)?;
        let inst = slot
            .instances
            .get(id)
            .ok_or_else(|| EngineError::UnknownAgreement(id.clone()))?;
        let active = inst
            .active_process()
            .ok_or(EngineError::AlreadyTerminated)?;
        let stage = slot
            .def
            .process(active.as_str())
            .map(|p| p.stage_kind)
            .ok_or_else(|| EngineError::UnknownTargetProcess(active.to_string()))?;
        let payload = StagePayload::new(id.as_str(), stage, stage);
        let applied = Driver::new(&slot.def).terminate(inst, outcome, payload, Cause::Exit, at)?;
        self.sink
            .commit(id, &applied.effects)
            .map_err(|e| EngineError::Hook {
                process: active.to_string(),
                error: HookError::Failed(e.0),
            })?;
        let slot = self.paths.get_mut(path).expect("slot looked up above");
        slot.instances.insert(id.clone(), applied.instance);
        Ok(&slot.instances[id])
    }

    /// The full registry as a store document.
    pub fn snapshot(&self) -> StoreDocument {
        let mut agreements = self.orphans.clone();
        for (name, slot) in &self.paths {
            if !slot.instances.is_empty() {
                agreements.insert(name.clone(), slot.instances.clone());
            }
        }
        let id_counters = self.ids.next.clone();
        StoreDocument {
            version: STORE_VERSION,
            id_counters,
            agreements: agreements
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().map(|(id, i)| (id.0, i)).collect()))
                .collect(),
        }
    }

    /// Loads stored instances and id counters. Must run on an engine with
    /// no instances; instances for paths registered later are held until
    /// registration.
    pub fn restore(&mut self, doc: StoreDocument) -> Result<(), EngineError> {
        if self.paths.values().any(|s| !s.instances.is_empty()) || !self.orphans.is_empty() {
            return Err(EngineError::Restore(
                "engine already holds agreements".into(),
            ));
        }
        for (k, v) in doc.id_counters {
            self.ids.next.insert(k, v);
        }
        for (path, instances) in doc.agreements {
            let mut map = BTreeMap::new();
            for (id, inst) in instances {
                if inst.id.0 != id || inst.path_name.as_str() != path {
                    return Err(EngineError::Restore(format!(
                        "agreement {id} is filed under the wrong key"
                    )));
                }
                map.insert(AgreementId(id), inst);
            }
            match self.paths.get_mut(&path) {
                Some(slot) => {
                    if let Some(bad) = map.values().find(|i| !slot.def.check_status(&i.status)) {
                        return Err(EngineError::Restore(format!(
                            "agreement {} sits in a process unknown to path {path}",
                            bad.id
                        )));
                    }
                    slot.instances = map;
                }
                None => {
                    self.orphans.insert(path, map);
                }
            }
        }
        Ok(())
    }
}

/// Hook rejections become a `rejected` disposition; anything else is an error.
fn refusal(e: EngineError) -> Result<DispatchOutcome, EngineError> {
    match e {
        EngineError::Hook {
            error: HookError::Rejected(reason),
            ..
        } => Ok(DispatchOutcome::rejected(reason)),
        other => Err(other),
    }
}

#[cfg(test)]
mod tests;

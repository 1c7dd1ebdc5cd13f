use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{AgreementId, DataModel, InputEnvelope, PathName, ProcessName, Timestamp};
use crate::stage::{StageKind, StagePayload};
use crate::stages::StageArchetype;

use super::path::PathDefinition;

/// What a process wants done after handling an input or an activation.
#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Wait,
    Transition {
        target: ProcessName,
        payload: StagePayload,
    },
    Terminate {
        outcome: String,
        payload: StagePayload,
    },
}

impl Directive {
    pub fn transition(target: ProcessName, payload: StagePayload) -> Self {
        Self::Transition { target, payload }
    }

    pub fn terminate(outcome: impl Into<String>, payload: StagePayload) -> Self {
        Self::Terminate {
            outcome: outcome.into(),
            payload,
        }
    }

    pub fn is_wait(&self) -> bool {
        matches!(self, Self::Wait)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub handle: String,
    pub amount: i64,
}

/// Outbound side effect requested by a hook. Effects are buffered for the
/// whole delivery and committed together only if every hook succeeded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    PostStatus {
        text: String,
        thread_id: Option<String>,
    },
    SendDm {
        to: String,
        text: String,
    },
    SendEmail {
        to: String,
        subject: String,
        body: String,
    },
    EscrowHold {
        contributions: Vec<Contribution>,
        beneficiary: String,
    },
    EscrowRelease,
    EscrowRefund,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct EffectRejected(pub String);

/// Receiver of committed effects. A commit is all-or-nothing.
pub trait EffectSink: Send + Sync {
    fn commit(&self, agreement: &AgreementId, effects: &[Effect]) -> Result<(), EffectRejected>;
}

/// Discards every effect.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EffectSink for NullSink {
    fn commit(&self, _: &AgreementId, _: &[Effect]) -> Result<(), EffectRejected> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HookError {
    /// The input is not acceptable here; the envelope is refused and nothing changes.
    #[error("rejected: {0}")]
    Rejected(String),
    /// The hook itself broke.
    #[error("hook failed: {0}")]
    Failed(String),
}

impl HookError {
    pub fn rejected(msg: impl Into<String>) -> Self {
        Self::Rejected(msg.into())
    }
}

pub type HookResult<T> = Result<T, HookError>;

/// Everything a hook may see or touch while it runs.
pub struct HookContext<'a> {
    pub(crate) agreement_id: &'a AgreementId,
    pub(crate) path: &'a PathDefinition,
    pub(crate) process: &'a ProcessName,
    pub(crate) model: &'a mut DataModel,
    pub(crate) effects: &'a mut Vec<Effect>,
    pub(crate) now: Timestamp,
}

impl<'a> HookContext<'a> {
    pub fn agreement_id(&self) -> &AgreementId {
        self.agreement_id
    }

    pub fn path_name(&self) -> &PathName {
        self.path.name()
    }

    pub fn process_name(&self) -> &ProcessName {
        self.process
    }

    pub fn own_stage(&self) -> StageKind {
        self.path
            .process(self.process.as_str())
            .map(|p| p.stage_kind)
            .unwrap_or(StageKind::Authoring)
    }

    pub fn stage_of(&self, process: &str) -> Option<StageKind> {
        self.path.process(process).map(|p| p.stage_kind)
    }

    pub fn model(&self) -> &DataModel {
        self.model
    }

    pub fn model_mut(&mut self) -> &mut DataModel {
        self.model
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn emit(&mut self, effect: Effect) {
        self.effects.push(effect);
    }

    /// A fresh payload addressed from this process to `target`.
    pub fn payload_to(&self, target: &ProcessName) -> StagePayload {
        let to = self.stage_of(target.as_str()).unwrap_or(self.own_stage());
        StagePayload::new(self.agreement_id.as_str(), self.own_stage(), to)
    }

    /// A fresh payload for a termination from this process.
    pub fn payload_terminal(&self) -> StagePayload {
        StagePayload::new(
            self.agreement_id.as_str(),
            self.own_stage(),
            self.own_stage(),
        )
    }
}

/// Behavior of one process node.
pub trait ProcessBehavior: Send + Sync {
    /// Runs when the process becomes active. `incoming` is `None` for the
    /// init process of a freshly created instance.
    fn on_activate(
        &self,
        _ctx: &mut HookContext<'_>,
        _incoming: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        Ok(Directive::Wait)
    }

    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive>;

    /// Side effects only; runs right before the process is left.
    fn on_exit(&self, _ctx: &mut HookContext<'_>) -> HookResult<()> {
        Ok(())
    }
}

/// Declared data-flow and control-flow facts about a process, checked by
/// `lint_path` and `transplant`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageContract {
    pub consumes: BTreeSet<String>,
    pub produces: BTreeSet<String>,
    pub targets: BTreeSet<ProcessName>,
    pub may_terminate: bool,
}

impl StageContract {
    pub fn consumes<I, S>(mut self, fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.consumes.extend(fields.into_iter().map(Into::into));
        self
    }

    pub fn produces<I, S>(mut self, fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.produces.extend(fields.into_iter().map(Into::into));
        self
    }

    pub fn target(mut self, target: ProcessName) -> Self {
        self.targets.insert(target);
        self
    }

    pub fn terminates(mut self) -> Self {
        self.may_terminate = true;
        self
    }
}

#[derive(Clone)]
pub struct ProcessDefinition {
    pub name: ProcessName,
    pub stage_kind: StageKind,
    pub behavior: Arc<dyn ProcessBehavior>,
    pub contract: StageContract,
    pub archetype: Option<StageArchetype>,
}

impl ProcessDefinition {
    pub fn new(
        name: ProcessName,
        stage_kind: StageKind,
        behavior: impl ProcessBehavior + 'static,
    ) -> Self {
        Self {
            name,
            stage_kind,
            behavior: Arc::new(behavior),
            contract: StageContract::default(),
            archetype: None,
        }
    }

    pub fn with_contract(mut self, contract: StageContract) -> Self {
        self.contract = contract;
        self
    }

    pub fn with_archetype(mut self, archetype: StageArchetype) -> Self {
        self.archetype = Some(archetype);
        self
    }

    pub fn renamed(mut self, name: ProcessName) -> Self {
        self.name = name;
        self
    }

    pub fn with_stage(mut self, stage_kind: StageKind) -> Self {
        self.stage_kind = stage_kind;
        self
    }
}

impl fmt::Debug for ProcessDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessDefinition")
            .field("name", &self.name)
            .field("stage_kind", &self.stage_kind)
            .field("contract", &self.contract)
            .field("archetype", &self.archetype)
            .finish_non_exhaustive()
    }
}

/// Adapts a closure into an `on_receive`-only behavior.
pub struct ReceiveFn<F>(pub F);

impl<F> ProcessBehavior for ReceiveFn<F>
where
    F: Fn(&mut HookContext<'_>, &InputEnvelope) -> HookResult<Directive> + Send + Sync,
{
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        (self.0)(ctx, env)
    }
}

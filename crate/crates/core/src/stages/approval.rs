use crate::engine::{
    Directive, HookContext, HookError, HookResult, ProcessBehavior, ProcessDefinition,
    StageContract,
};
use crate::model::{InputEnvelope, ProcessName};
use crate::stage::{StageKind, AGREEMENT_REF};

use super::{ArchetypeKind, StageArchetype, DATA_SECTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approval {
    Accepted,
    Declined,
}

/// Lets one designated approver accept or decline by sending a token.
#[derive(Debug, Clone)]
pub struct ApprovalGate {
    /// Model key (data section) holding the approver's handle.
    pub approver_key: String,
    pub accept: String,
    pub reject: String,
}

impl ApprovalGate {
    pub fn new(approver_key: &str) -> Self {
        Self {
            approver_key: approver_key.to_string(),
            accept: "accept".into(),
            reject: "reject".into(),
        }
    }

    pub fn approver<'c>(&self, ctx: &'c HookContext<'_>) -> Option<&'c str> {
        ctx.model().get_str(DATA_SECTION, &self.approver_key)
    }

    pub fn decide(&self, ctx: &HookContext<'_>, env: &InputEnvelope) -> HookResult<Approval> {
        let approver = self
            .approver(ctx)
            .ok_or_else(|| HookError::Failed(format!("no approver under {}", self.approver_key)))?;
        if env.actor.handle != approver {
            return Err(HookError::rejected(format!(
                "only {approver} can approve this agreement"
            )));
        }
        let token = env
            .payload_str("text")
            .map(|t| t.trim().to_lowercase())
            .unwrap_or_default();
        if token == self.accept {
            Ok(Approval::Accepted)
        } else if token == self.reject {
            Ok(Approval::Declined)
        } else {
            Err(HookError::rejected(format!(
                "reply {:?} or {:?}",
                self.accept, self.reject
            )))
        }
    }
}

struct ApprovalProcess {
    gate: ApprovalGate,
    accept_target: ProcessName,
    reject_outcome: String,
}

impl ProcessBehavior for ApprovalProcess {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        Ok(match self.gate.decide(ctx, env)? {
            Approval::Accepted => Directive::transition(
                self.accept_target.clone(),
                ctx.payload_to(&self.accept_target),
            ),
            Approval::Declined => {
                Directive::terminate(self.reject_outcome.clone(), ctx.payload_terminal())
            }
        })
    }
}

pub fn make_approval_gate(
    approver_key: &str,
    accept_target: ProcessName,
    reject_outcome: &str,
) -> ProcessDefinition {
    let archetype = StageArchetype::new(ArchetypeKind::ApprovalGate)
        .param("approver_key", approver_key)
        .param("accept_target", accept_target.as_str())
        .param("reject_outcome", reject_outcome);
    let contract = StageContract::default()
        .produces([AGREEMENT_REF])
        .target(accept_target.clone())
        .terminates();
    ProcessDefinition::new(
        ProcessName::new("ApprovalGate").expect("valid token"),
        StageKind::Registration,
        ApprovalProcess {
            gate: ApprovalGate::new(approver_key),
            accept_target,
            reject_outcome: reject_outcome.to_string(),
        },
    )
    .with_contract(contract)
    .with_archetype(archetype)
}

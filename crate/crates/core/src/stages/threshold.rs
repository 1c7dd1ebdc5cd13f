use serde_json::{json, Value};

use crate::engine::{
    Directive, HookContext, HookError, HookResult, InputEnvelope, ProcessBehavior,
    ProcessDefinition, StageContract,
};
use crate::model::ProcessName;
use crate::stage::{StageKind, StagePayload, AGREEMENT_REF};

use super::{ArchetypeError, ArchetypeKind, StageArchetype, DATA_SECTION};

pub const OUTCOME_INVALID: &str = "invalid";

/// Accumulates positive integer amounts and fires one transition when the
/// running total strictly exceeds the threshold.
///
/// Model keys (under the gate's section): `pledges` (list of
/// `{supporter, amount}`), `total`, `fired`.
#[derive(Debug, Clone)]
pub struct ThresholdGate {
    pub field: String,
    pub threshold: i64,
    pub target: ProcessName,
    pub section: String,
}

/// What happened to one contribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GateStep {
    Below { total: i64 },
    Crossed { total: i64 },
}

impl ThresholdGate {
    pub fn new(field: &str, threshold: i64, target: ProcessName) -> Result<Self, ArchetypeError> {
        if threshold <= 0 {
            return Err(ArchetypeError::BadParameter(
                "threshold",
                format!("must be positive, got {threshold}"),
            ));
        }
        Ok(Self {
            field: field.to_string(),
            threshold,
            target,
            section: DATA_SECTION.to_string(),
        })
    }

    pub fn total(&self, ctx: &HookContext<'_>) -> i64 {
        ctx.model().get_i64(&self.section, "total").unwrap_or(0)
    }

    /// True before the first contribution has been recorded.
    pub fn is_fresh(&self, ctx: &HookContext<'_>) -> bool {
        ctx.model().get(&self.section, "total").is_none()
    }

    /// Parses the amount carried by `env`. Only positive JSON integers count.
    pub fn amount(&self, env: &InputEnvelope) -> Option<i64> {
        env.payload.get(&self.field)?.as_i64().filter(|a| *a > 0)
    }

    /// Records a contribution. Invalid amounts are rejected without mutation.
    pub fn contribute(
        &self,
        ctx: &mut HookContext<'_>,
        env: &InputEnvelope,
    ) -> HookResult<GateStep> {
        let amount = self.amount(env).ok_or_else(|| {
            HookError::rejected(format!("`{}` must be a positive integer", self.field))
        })?;
        if ctx
            .model()
            .get(&self.section, "fired")
            .and_then(Value::as_bool)
            == Some(true)
        {
            return Err(HookError::rejected("threshold already reached"));
        }
        let total = self
            .total(ctx)
            .checked_add(amount)
            .ok_or_else(|| HookError::rejected("amount overflows the running total"))?;
        let mut pledges = match ctx.model().get(&self.section, "pledges") {
            Some(Value::Array(a)) => a.clone(),
            _ => Vec::new(),
        };
        pledges.push(json!({ "supporter": env.actor.handle, "amount": amount }));
        let model = ctx.model_mut();
        model.set(&self.section, "pledges", Value::Array(pledges));
        model.set(&self.section, "total", total);
        if total > self.threshold {
            model.set(&self.section, "fired", true);
            Ok(GateStep::Crossed { total })
        } else {
            Ok(GateStep::Below { total })
        }
    }

    /// Distinct contributors in first-contribution order, with their sums.
    pub fn contributors(&self, ctx: &HookContext<'_>) -> Vec<(String, i64)> {
        contributors_in(ctx.model().get(&self.section, "pledges"))
    }

    pub fn crossing_payload(&self, ctx: &HookContext<'_>, total: i64) -> StagePayload {
        let names: Vec<String> = self.contributors(ctx).into_iter().map(|(h, _)| h).collect();
        ctx.payload_to(&self.target)
            .with_extra(&self.field, total)
            .with_extra("contributors", names)
    }
}

pub(crate) fn contributors_in(pledges: Option<&Value>) -> Vec<(String, i64)> {
    let mut out: Vec<(String, i64)> = Vec::new();
    let Some(Value::Array(list)) = pledges else {
        return out;
    };
    for p in list {
        let (Some(h), Some(a)) = (
            p.get("supporter").and_then(Value::as_str),
            p.get("amount").and_then(Value::as_i64),
        ) else {
            continue;
        };
        match out.iter_mut().find(|(x, _)| x == h) {
            Some(entry) => entry.1 += a,
            None => out.push((h.to_string(), a)),
        }
    }
    out
}

impl ProcessBehavior for ThresholdGate {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        let fresh = self.is_fresh(ctx);
        match self.contribute(ctx, env) {
            Ok(GateStep::Below { .. }) => Ok(Directive::Wait),
            Ok(GateStep::Crossed { total }) => {
                let payload = self.crossing_payload(ctx, total);
                Ok(Directive::transition(self.target.clone(), payload))
            }
            Err(HookError::Rejected(_)) if fresh => Ok(Directive::terminate(
                OUTCOME_INVALID,
                ctx.payload_terminal(),
            )),
            Err(e) => Err(e),
        }
    }
}

/// A gate process named `ThresholdGate` (rename with `renamed`).
pub fn make_threshold_gate(
    field: &str,
    threshold: i64,
    target: ProcessName,
) -> Result<ProcessDefinition, ArchetypeError> {
    let gate = ThresholdGate::new(field, threshold, target.clone())?;
    let archetype = StageArchetype::new(ArchetypeKind::ThresholdGate)
        .param("field", field)
        .param("threshold", threshold)
        .param("target", target.as_str());
    let contract = StageContract::default()
        .produces([
            AGREEMENT_REF.to_string(),
            format!("extras.{field}"),
            "extras.contributors".to_string(),
        ])
        .target(target)
        .terminates();
    Ok(ProcessDefinition::new(
        ProcessName::new("ThresholdGate").expect("valid token"),
        StageKind::Authoring,
        gate,
    )
    .with_contract(contract)
    .with_archetype(archetype))
}

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::engine::{
    Directive, HookContext, HookError, HookResult, InputEnvelope, ProcessBehavior,
    ProcessDefinition, StageContract,
};
use crate::model::ProcessName;
use crate::stage::{StageKind, AGREEMENT_REF};

use super::{ArchetypeError, ArchetypeKind, StageArchetype, DATA_SECTION};

/// Trim and lowercase; the token must then equal one of `verdicts`.
pub fn normalize_verdict(raw: &str, verdicts: &BTreeSet<String>) -> Option<String> {
    let v = raw.trim().to_lowercase();
    verdicts.contains(&v).then_some(v)
}

/// Collects the latest verdict of every party and moves on once all parties
/// have spoken: to `agree_target` when they all match, else to
/// `disagree_target`. When `disagree_target` is the process the gate runs
/// in, a disagreement just waits for revisions.
///
/// Parties are read from the model as a list of handles under
/// `parties_field`; verdicts are kept under `verdicts` as
/// `handle -> {value, at}`.
#[derive(Debug, Clone)]
pub struct ConsensusGate {
    pub parties_field: String,
    pub verdicts: BTreeSet<String>,
    pub agree_target: ProcessName,
    pub disagree_target: ProcessName,
    pub section: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusState {
    Pending,
    Agreed(String),
    Disagreed,
}

impl ConsensusGate {
    pub fn new(
        parties_field: &str,
        verdicts: impl IntoIterator<Item = impl Into<String>>,
        agree_target: ProcessName,
        disagree_target: ProcessName,
    ) -> Result<Self, ArchetypeError> {
        let verdicts: BTreeSet<String> = verdicts
            .into_iter()
            .map(|v| v.into().trim().to_lowercase())
            .collect();
        if verdicts.len() < 2 {
            return Err(ArchetypeError::BadParameter(
                "verdicts",
                "need at least two distinct verdicts".into(),
            ));
        }
        Ok(Self {
            parties_field: parties_field.to_string(),
            verdicts,
            agree_target,
            disagree_target,
            section: DATA_SECTION.to_string(),
        })
    }

    pub fn parties(&self, ctx: &HookContext<'_>) -> Vec<String> {
        match ctx.model().get(&self.section, &self.parties_field) {
            Some(Value::Array(a)) => a
                .iter()
                .filter_map(|v| v.as_str().map(str::to_string))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn latest(&self, ctx: &HookContext<'_>) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        if let Some(Value::Object(m)) = ctx.model().get(&self.section, "verdicts") {
            for (who, v) in m {
                if let Some(value) = v.get("value").and_then(Value::as_str) {
                    out.insert(who.clone(), value.to_string());
                }
            }
        }
        out
    }

    pub fn state(&self, ctx: &HookContext<'_>) -> ConsensusState {
        let parties = self.parties(ctx);
        let latest = self.latest(ctx);
        let mut values = parties.iter().map(|p| latest.get(p));
        let Some(Some(first)) = values.next() else {
            return ConsensusState::Pending;
        };
        let mut all_equal = true;
        for v in values {
            match v {
                None => return ConsensusState::Pending,
                Some(v) if v != first => all_equal = false,
                Some(_) => {}
            }
        }
        if all_equal {
            ConsensusState::Agreed(first.clone())
        } else {
            ConsensusState::Disagreed
        }
    }

    /// Extracts the verdict from `payload.verdict`, falling back to `payload.text`.
    pub fn verdict_of(&self, env: &InputEnvelope) -> Option<String> {
        let raw = env
            .payload_str("verdict")
            .or_else(|| env.payload_str("text"))?;
        normalize_verdict(raw, &self.verdicts)
    }

    /// Records the sender's verdict. Envelopes from non-parties or without a
    /// recognizable verdict are rejected.
    pub fn record(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<()> {
        let parties = self.parties(ctx);
        if !parties.iter().any(|p| p == &env.actor.handle) {
            return Err(HookError::rejected(format!(
                "{} is not a party",
                env.actor.handle
            )));
        }
        let verdict = self
            .verdict_of(env)
            .ok_or_else(|| HookError::rejected("no recognizable verdict"))?;
        let mut all = match ctx.model().get(&self.section, "verdicts") {
            Some(Value::Object(m)) => m.clone(),
            _ => serde_json::Map::new(),
        };
        let at = ctx.now().to_string();
        all.insert(
            env.actor.handle.clone(),
            json!({ "value": verdict, "at": at }),
        );
        ctx.model_mut()
            .set(&self.section, "verdicts", Value::Object(all));
        Ok(())
    }

    /// Directive for the current state, seen from the process the gate runs in.
    pub fn decide(&self, ctx: &HookContext<'_>) -> Directive {
        match self.state(ctx) {
            ConsensusState::Pending => Directive::Wait,
            ConsensusState::Agreed(value) => {
                let payload = ctx
                    .payload_to(&self.agree_target)
                    .with_extra("consensus", value);
                Directive::transition(self.agree_target.clone(), payload)
            }
            ConsensusState::Disagreed if &self.disagree_target == ctx.process_name() => {
                Directive::Wait
            }
            ConsensusState::Disagreed => {
                let payload = ctx.payload_to(&self.disagree_target);
                Directive::transition(self.disagree_target.clone(), payload)
            }
        }
    }
}

impl ProcessBehavior for ConsensusGate {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        self.record(ctx, env)?;
        Ok(self.decide(ctx))
    }
}

pub fn make_consensus_gate(
    parties_field: &str,
    verdicts: &[&str],
    agree_target: ProcessName,
    disagree_target: ProcessName,
) -> Result<ProcessDefinition, ArchetypeError> {
    let gate = ConsensusGate::new(
        parties_field,
        verdicts.iter().copied(),
        agree_target.clone(),
        disagree_target.clone(),
    )?;
    let archetype = StageArchetype::new(ArchetypeKind::ConsensusGate)
        .param("parties_field", parties_field)
        .param(
            "verdicts",
            Value::Array(
                gate.verdicts
                    .iter()
                    .map(|v| Value::from(v.as_str()))
                    .collect(),
            ),
        )
        .param("agree_target", agree_target.as_str())
        .param("disagree_target", disagree_target.as_str());
    let contract = StageContract::default()
        .produces([AGREEMENT_REF, "extras.consensus"])
        .target(agree_target)
        .target(disagree_target);
    Ok(ProcessDefinition::new(
        ProcessName::new("ConsensusGate").expect("valid token"),
        StageKind::Execution,
        gate,
    )
    .with_contract(contract)
    .with_archetype(archetype))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_normalization() {
        let set: BTreeSet<String> = ["upheld", "broken"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            normalize_verdict("  UPHELD \n", &set).as_deref(),
            Some("upheld")
        );
        assert_eq!(normalize_verdict("Broken", &set).as_deref(), Some("broken"));
        assert_eq!(normalize_verdict("upheld!", &set), None);
        assert_eq!(normalize_verdict("maybe", &set), None);
    }

    #[test]
    fn needs_two_verdicts() {
        let t = ProcessName::new("T").unwrap();
        assert!(ConsensusGate::new("parties", ["yes", " YES"], t.clone(), t).is_err());
    }
}

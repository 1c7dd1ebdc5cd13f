use serde_json::Value;

use crate::engine::{
    Directive, HookContext, HookError, HookResult, ProcessBehavior, ProcessDefinition,
    StageContract,
};
use crate::model::{DataModel, InputEnvelope, ProcessName};
use crate::stage::{StageKind, StagePayload, SUMMARY_FIELDS};

use super::threshold::OUTCOME_INVALID;
use super::{ArchetypeKind, StageArchetype};

pub const REGISTRATION_SECTION: &str = "registration";

/// Writes an agreement's identity, content digest, parties and status into
/// the data model.
#[derive(Debug, Clone)]
pub struct RegistrationRecorder {
    pub section: String,
}

impl Default for RegistrationRecorder {
    fn default() -> Self {
        Self {
            section: REGISTRATION_SECTION.to_string(),
        }
    }
}

impl RegistrationRecorder {
    pub fn with_section(section: &str) -> Self {
        Self {
            section: section.to_string(),
        }
    }

    pub fn record(&self, model: &mut DataModel, payload: &StagePayload) -> HookResult<()> {
        if let Some(missing) = SUMMARY_FIELDS.iter().find(|f| !payload.has_field(f)) {
            return Err(HookError::rejected(format!("registration needs {missing}")));
        }
        let s = &payload.summary;
        model.set(&self.section, "identity", s.identity.as_str());
        model.set(&self.section, "content_digest", s.content_digest.as_str());
        model.set(
            &self.section,
            "parties",
            serde_json::to_value(&s.parties).expect("parties serialize"),
        );
        model.set(&self.section, "status", s.status.as_str());
        Ok(())
    }

    pub fn update_status(&self, model: &mut DataModel, status: &str) {
        model.set(&self.section, "status", status);
    }

    pub fn status<'m>(&self, model: &'m DataModel) -> Option<&'m str> {
        model.get_str(&self.section, "status")
    }

    pub fn parties<'m>(&self, model: &'m DataModel) -> Option<&'m Value> {
        model.get(&self.section, "parties")
    }
}

/// Standalone recorder process: on activation records the incoming payload
/// and, when `next` is set, passes it straight on.
#[derive(Debug, Clone)]
struct RecorderProcess {
    recorder: RegistrationRecorder,
    next: Option<ProcessName>,
}

impl ProcessBehavior for RecorderProcess {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        incoming: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        let Some(payload) = incoming else {
            return Ok(Directive::Wait);
        };
        if self.recorder.record(ctx.model_mut(), payload).is_err() {
            return Ok(Directive::terminate(
                OUTCOME_INVALID,
                ctx.payload_terminal(),
            ));
        }
        match &self.next {
            Some(next) => {
                let mut forward = payload.clone();
                forward.from_stage = ctx.own_stage();
                forward.to_stage = ctx.stage_of(next.as_str()).unwrap_or(forward.to_stage);
                Ok(Directive::transition(next.clone(), forward))
            }
            None => Ok(Directive::Wait),
        }
    }

    fn on_receive(
        &self,
        _ctx: &mut HookContext<'_>,
        _env: &InputEnvelope,
    ) -> HookResult<Directive> {
        Err(HookError::rejected(
            "the registration recorder takes no input",
        ))
    }
}

/// Recorder process named `RegistrationRecorder`, writing to
/// [`REGISTRATION_SECTION`].
pub fn make_registration_recorder(next: Option<ProcessName>) -> ProcessDefinition {
    make_registration_recorder_in(RegistrationRecorder::default(), next)
}

pub fn make_registration_recorder_in(
    recorder: RegistrationRecorder,
    next: Option<ProcessName>,
) -> ProcessDefinition {
    let mut archetype = StageArchetype::new(ArchetypeKind::RegistrationRecorder)
        .param("section", recorder.section.as_str());
    let mut contract = StageContract::default()
        .consumes(SUMMARY_FIELDS)
        .produces(SUMMARY_FIELDS)
        .terminates();
    if let Some(n) = &next {
        archetype = archetype.param("next", n.as_str());
        contract = contract.target(n.clone());
    }
    ProcessDefinition::new(
        ProcessName::new("RegistrationRecorder").expect("valid token"),
        StageKind::Registration,
        RecorderProcess { recorder, next },
    )
    .with_contract(contract)
    .with_archetype(archetype)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Actor;
    use crate::stage::Summary;

    fn payload(parties: Vec<Actor>) -> StagePayload {
        StagePayload::new("tsc-1", StageKind::Authoring, StageKind::Execution).with_summary(
            Summary {
                identity: "tsc-1".into(),
                content_digest: "abc".into(),
                parties,
                status: "registered".into(),
            },
        )
    }

    #[test]
    fn records_and_updates() {
        let r = RegistrationRecorder::default();
        let mut m = DataModel::new();
        let parties = vec![Actor::new("social", "alice"), Actor::new("social", "bob")];
        r.record(&mut m, &payload(parties)).unwrap();
        assert_eq!(m.get_str("registration", "identity"), Some("tsc-1"));
        assert_eq!(r.parties(&m).unwrap().as_array().unwrap().len(), 2);
        r.update_status(&mut m, "upheld");
        assert_eq!(r.status(&m), Some("upheld"));
    }

    #[test]
    fn empty_parties_invalid() {
        let r = RegistrationRecorder::default();
        let mut m = DataModel::new();
        assert!(matches!(
            r.record(&mut m, &payload(vec![])),
            Err(HookError::Rejected(_))
        ));
        assert!(m.is_empty());
    }
}

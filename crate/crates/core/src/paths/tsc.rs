use serde_json::Value;

use crate::adapters::inbound::{has_keyword, other_parties, DEFAULT_BOT, SOCIAL_SOURCE};
use crate::engine::{
    Directive, Effect, HookContext, HookError, HookResult, InterfaceDefinition, MatchResult,
    PathDefinition, ProcessBehavior, ProcessDefinition, RegistryView, StageContract,
};
use crate::model::{Actor, InputEnvelope};
use crate::stage::{StageKind, StagePayload, Summary, AGREEMENT_REF, SUMMARY_FIELDS};
use crate::stages::{ConsensusGate, RegistrationRecorder, DATA_SECTION, OUTCOME_INVALID};

use super::{content_digest, pname, OUTCOME_ABANDONED};

pub const TSC_PATH: &str = "tsc";
pub const MENTION_AUTHORING: &str = "MentionAuthoring";
pub const VERDICT_COLLECTION: &str = "VerdictCollection";
pub const DISPUTE_RESOLUTION: &str = "DisputeResolution";
pub const RECORDING: &str = "Recording";
pub const VERDICTS: [&str; 2] = ["upheld", "broken"];

fn data_str(ctx: &HookContext<'_>, key: &str) -> String {
    ctx.model()
        .get_str(DATA_SECTION, key)
        .unwrap_or_default()
        .to_string()
}

fn thread(ctx: &HookContext<'_>) -> Option<String> {
    ctx.model()
        .get_str(DATA_SECTION, "root_thread")
        .map(str::to_string)
}

struct MentionAuthoring {
    recorder: RegistrationRecorder,
}

impl ProcessBehavior for MentionAuthoring {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        if ctx.model().get(DATA_SECTION, "initiator").is_some() {
            return Err(HookError::rejected("agreement already authored"));
        }
        let invalid = |ctx: &HookContext<'_>| {
            Ok(Directive::terminate(
                OUTCOME_INVALID,
                ctx.payload_terminal(),
            ))
        };
        let text = env.payload_str("text").unwrap_or_default();
        if env.kind != "status_mention" || !has_keyword(text) {
            return invalid(ctx);
        }
        let initiator = env.actor.handle.clone();
        let mentions: Vec<String> = match env.payload.get("mentions") {
            Some(Value::Array(a)) => a
                .iter()
                .filter_map(Value::as_str)
                .filter(|h| {
                    !h.eq_ignore_ascii_case(&initiator) && !h.eq_ignore_ascii_case(DEFAULT_BOT)
                })
                .map(str::to_string)
                .collect(),
            _ => other_parties(text, DEFAULT_BOT, &initiator),
        };
        let [counterparty] = mentions.as_slice() else {
            return invalid(ctx);
        };
        let counterparty = counterparty.clone();
        let id = ctx.agreement_id().to_string();
        let root = env
            .correlation
            .thread_id
            .clone()
            .unwrap_or_else(|| id.clone());
        let model = ctx.model_mut();
        model.set(DATA_SECTION, "initiator", initiator.as_str());
        model.set(DATA_SECTION, "counterparty", counterparty.as_str());
        model.set(
            DATA_SECTION,
            "parties",
            vec![initiator.clone(), counterparty.clone()],
        );
        model.set(DATA_SECTION, "terms", text);
        model.set(DATA_SECTION, "root_thread", root.as_str());
        ctx.emit(Effect::PostStatus {
            text: format!(
                "@{initiator} @{counterparty} agreement {id} is registered. Reply \"upheld\" or \"broken\" once it is due."
            ),
            thread_id: Some(root),
        });
        let target = pname(VERDICT_COLLECTION);
        let payload = ctx.payload_to(&target).with_summary(Summary {
            identity: id,
            content_digest: content_digest(text),
            parties: vec![
                Actor::new(SOCIAL_SOURCE, initiator),
                Actor::new(SOCIAL_SOURCE, counterparty),
            ],
            status: "registered".into(),
        });
        self.recorder.record(ctx.model_mut(), &payload)?;
        Ok(Directive::transition(target, payload))
    }
}

/// Verdict handling shared by collection and dispute resolution.
struct Verdicts {
    gate: ConsensusGate,
    recorder: RegistrationRecorder,
}

impl Verdicts {
    fn receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        match env.kind.as_str() {
            "reply" => {
                self.gate.record(ctx, env)?;
                Ok(self.gate.decide(ctx))
            }
            "abandon" => {
                if !self.gate.parties(ctx).contains(&env.actor.handle) {
                    return Err(HookError::rejected(format!(
                        "{} is not a party",
                        env.actor.handle
                    )));
                }
                self.recorder
                    .update_status(ctx.model_mut(), OUTCOME_ABANDONED);
                Ok(Directive::terminate(
                    OUTCOME_ABANDONED,
                    ctx.payload_terminal(),
                ))
            }
            other => Err(HookError::rejected(format!("unexpected {other}"))),
        }
    }
}

struct VerdictCollection(Verdicts);

impl ProcessBehavior for VerdictCollection {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        self.0.receive(ctx, env)
    }
}

struct DisputeResolution(Verdicts);

impl ProcessBehavior for DisputeResolution {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        _: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        let latest = self.0.gate.latest(ctx);
        let positions: Vec<String> = self
            .0
            .gate
            .parties(ctx)
            .iter()
            .map(|p| {
                format!(
                    "@{p} says {}",
                    latest.get(p).map(String::as_str).unwrap_or("nothing")
                )
            })
            .collect();
        let text = format!(
            "No consensus on agreement {} yet ({}). Reply \"upheld\" or \"broken\" again to settle it.",
            ctx.agreement_id(),
            positions.join(", ")
        );
        let thread_id = thread(ctx);
        ctx.emit(Effect::PostStatus { text, thread_id });
        Ok(Directive::Wait)
    }

    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        self.0.receive(ctx, env)
    }
}

struct Recording {
    recorder: RegistrationRecorder,
}

impl ProcessBehavior for Recording {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        incoming: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        let result = incoming
            .and_then(|p| p.extra_str("consensus"))
            .ok_or_else(|| HookError::Failed("recording needs a consensus value".into()))?
            .to_string();
        ctx.model_mut().set(DATA_SECTION, "result", result.as_str());
        let text = format!(
            "Agreement {} between @{} and @{} was {result}: {}",
            ctx.agreement_id(),
            data_str(ctx, "initiator"),
            data_str(ctx, "counterparty"),
            data_str(ctx, "terms"),
        );
        let thread_id = thread(ctx);
        ctx.emit(Effect::PostStatus { text, thread_id });
        self.recorder.update_status(ctx.model_mut(), &result);
        let mut payload = ctx.payload_terminal();
        payload.summary.status = result.clone();
        Ok(Directive::terminate(result, payload))
    }

    fn on_receive(
        &self,
        _ctx: &mut HookContext<'_>,
        _env: &InputEnvelope,
    ) -> HookResult<Directive> {
        Err(HookError::rejected("recording takes no input"))
    }
}

fn by_thread<'a>(
    env: &InputEnvelope,
    view: &RegistryView<'a>,
) -> Option<&'a crate::engine::AgreementInstance> {
    let t = env.correlation.thread_id.as_deref()?;
    view.find(|i| i.data_model.get_str(DATA_SECTION, "root_thread") == Some(t))
}

fn social_match(env: &InputEnvelope, view: &RegistryView<'_>) -> MatchResult {
    match (env.kind.as_str(), by_thread(env, view)) {
        (_, Some(i)) => MatchResult::Existing(i.id.clone()),
        ("status_mention", None) => MatchResult::New,
        _ => MatchResult::Decline,
    }
}

fn verdicts(disagree: &str) -> Verdicts {
    Verdicts {
        gate: ConsensusGate::new("parties", VERDICTS, pname(RECORDING), pname(disagree))
            .expect("two verdicts"),
        recorder: RegistrationRecorder::default(),
    }
}

/// Agreements authored by tweeting at the bot, tagging one other user and
/// using the keyword "agreement". Both parties reply in the thread with
/// "upheld" or "broken"; disagreement moves to dispute resolution, where
/// revisions are taken until the verdicts match. The result is posted
/// publicly.
///
/// Envelopes (source `social`): `status_mention {text, mentions?}`,
/// `reply {text, verdict?}` and `abandon`, correlated by `thread_id`.
pub fn build_tsc_path() -> PathDefinition {
    let summary = SUMMARY_FIELDS.iter().map(|s| s.to_string());
    let authoring = ProcessDefinition::new(
        pname(MENTION_AUTHORING),
        StageKind::Authoring,
        MentionAuthoring {
            recorder: RegistrationRecorder::default(),
        },
    )
    .with_contract(
        StageContract::default()
            .produces(summary)
            .produces([AGREEMENT_REF])
            .target(pname(VERDICT_COLLECTION))
            .terminates(),
    );
    let collection = ProcessDefinition::new(
        pname(VERDICT_COLLECTION),
        StageKind::Execution,
        VerdictCollection(verdicts(DISPUTE_RESOLUTION)),
    )
    .with_contract(
        StageContract::default()
            .produces([AGREEMENT_REF, "extras.consensus"])
            .target(pname(RECORDING))
            .target(pname(DISPUTE_RESOLUTION))
            .terminates(),
    );
    let dispute = ProcessDefinition::new(
        pname(DISPUTE_RESOLUTION),
        StageKind::Appeal,
        DisputeResolution(verdicts(DISPUTE_RESOLUTION)),
    )
    .with_contract(
        StageContract::default()
            .produces([AGREEMENT_REF, "extras.consensus"])
            .target(pname(RECORDING))
            .terminates(),
    );
    let recording = ProcessDefinition::new(
        pname(RECORDING),
        StageKind::Enforcement,
        Recording {
            recorder: RegistrationRecorder::default(),
        },
    )
    .with_contract(
        StageContract::default()
            .consumes(["extras.consensus"])
            .terminates(),
    );

    PathDefinition::builder(TSC_PATH)
        .process(authoring)
        .process(collection)
        .process(dispute)
        .process(recording)
        .init(MENTION_AUTHORING)
        .interface(InterfaceDefinition::new(
            "social",
            |env| {
                env.source == SOCIAL_SOURCE
                    && match env.kind.as_str() {
                        "status_mention" => {
                            has_keyword(env.payload_str("text").unwrap_or_default())
                        }
                        "reply" | "abandon" => true,
                        _ => false,
                    }
            },
            social_match,
        ))
        .build()
        .expect("the tsc path is well formed")
}

use serde_json::{json, Value};

use crate::engine::{
    Contribution, Directive, Effect, HookContext, HookError, HookResult, InterfaceDefinition,
    MatchResult, PathDefinition, ProcessBehavior, ProcessDefinition, RegistryView, StageContract,
};
use crate::model::{Actor, AgreementId, InputEnvelope};
use crate::stage::{StageKind, StagePayload, Summary, AGREEMENT_REF, SUMMARY_FIELDS};
use crate::stages::{
    contributors_in, Approval, ApprovalGate, GateStep, RegistrationRecorder, ThresholdGate,
    DATA_SECTION, OUTCOME_INVALID,
};

use super::{content_digest, pname, OUTCOME_DECLINED, OUTCOME_FULFILLED};

pub const SCARCE_PATH: &str = "scarce";
pub const PLEDGE_AUTHORING: &str = "PledgeAuthoring";
pub const AUTHOR_APPROVAL: &str = "AuthorApproval";
pub const ESSAY_SUBMISSION: &str = "EssaySubmission";
pub const DISTRIBUTION: &str = "Distribution";
/// Pledges must strictly exceed this many units.
pub const PLEDGE_THRESHOLD: i64 = 500;

const WEB_FORM: &str = "web-form";
const SOCIAL: &str = "social";

fn data_str(ctx: &HookContext<'_>, key: &str) -> String {
    ctx.model()
        .get_str(DATA_SECTION, key)
        .unwrap_or_default()
        .to_string()
}

fn nonempty<'e>(env: &'e InputEnvelope, key: &str) -> Option<&'e str> {
    env.payload_str(key)
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

fn stored_summary(ctx: &HookContext<'_>) -> Summary {
    ctx.model()
        .get(DATA_SECTION, "summary")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .unwrap_or_default()
}

struct PledgeAuthoring {
    gate: ThresholdGate,
}

impl PledgeAuthoring {
    fn summary(&self, ctx: &HookContext<'_>) -> Summary {
        let author = data_str(ctx, "author");
        let topic = data_str(ctx, "topic");
        let mut parties = vec![Actor::new(SOCIAL, author.clone())];
        parties.extend(
            self.gate
                .contributors(ctx)
                .into_iter()
                .map(|(h, _)| Actor::new("web", h)),
        );
        Summary {
            identity: ctx.agreement_id().to_string(),
            content_digest: content_digest(&format!("{author}\n{topic}")),
            parties,
            status: "funded".into(),
        }
    }
}

impl ProcessBehavior for PledgeAuthoring {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        let fresh = self.gate.is_fresh(ctx);
        let invalid = |ctx: &HookContext<'_>, why: &str| {
            if fresh {
                Ok(Directive::terminate(
                    OUTCOME_INVALID,
                    ctx.payload_terminal(),
                ))
            } else {
                Err(HookError::rejected(why))
            }
        };
        if env.kind != "pledge" {
            return invalid(ctx, "only pledges are accepted until the author is asked");
        }
        let (Some(author), Some(topic)) = (nonempty(env, "author"), nonempty(env, "topic")) else {
            return invalid(ctx, "a pledge names an author and a topic");
        };
        if self.gate.amount(env).is_none() {
            return invalid(ctx, "amount must be a positive integer");
        }
        if fresh {
            let model = ctx.model_mut();
            model.set(DATA_SECTION, "author", author);
            model.set(DATA_SECTION, "topic", topic);
        }
        match self.gate.contribute(ctx, env)? {
            GateStep::Below { .. } => Ok(Directive::Wait),
            GateStep::Crossed { total } => {
                let summary = self.summary(ctx);
                let payload = self
                    .gate
                    .crossing_payload(ctx, total)
                    .with_summary(summary)
                    .with_extra("author", data_str(ctx, "author"))
                    .with_extra("topic", data_str(ctx, "topic"));
                Ok(Directive::transition(pname(AUTHOR_APPROVAL), payload))
            }
        }
    }
}

struct AuthorApproval {
    gate: ApprovalGate,
    recorder: RegistrationRecorder,
}

impl ProcessBehavior for AuthorApproval {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        incoming: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        if let Some(p) = incoming {
            let summary = serde_json::to_value(&p.summary).expect("summary serializes");
            ctx.model_mut().set(DATA_SECTION, "summary", summary);
        }
        let author = data_str(ctx, "author");
        let topic = data_str(ctx, "topic");
        let total = ctx.model().get_i64(DATA_SECTION, "total").unwrap_or(0);
        let text = format!(
            "You have a ${total} bounty for an essay on \"{topic}\" (agreement {}). Reply accept or reject.",
            ctx.agreement_id()
        );
        ctx.emit(Effect::SendDm { to: author, text });
        Ok(Directive::Wait)
    }

    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        if env.kind != "dm" {
            return Err(HookError::rejected(
                "pledging is closed while the author decides",
            ));
        }
        match self.gate.decide(ctx, env)? {
            Approval::Declined => {
                self.recorder
                    .update_status(ctx.model_mut(), OUTCOME_DECLINED);
                Ok(Directive::terminate(
                    OUTCOME_DECLINED,
                    ctx.payload_terminal(),
                ))
            }
            Approval::Accepted => {
                let contributions: Vec<Contribution> =
                    contributors_in(ctx.model().get(DATA_SECTION, "pledges"))
                        .into_iter()
                        .map(|(handle, amount)| Contribution { handle, amount })
                        .collect();
                let held: i64 = contributions.iter().map(|c| c.amount).sum();
                ctx.emit(Effect::EscrowHold {
                    contributions,
                    beneficiary: data_str(ctx, "author"),
                });
                ctx.model_mut().set(DATA_SECTION, "escrow_held", held);
                let mut summary = stored_summary(ctx);
                summary.status = "accepted".into();
                let target = pname(ESSAY_SUBMISSION);
                let payload = ctx.payload_to(&target).with_summary(summary);
                self.recorder.record(ctx.model_mut(), &payload)?;
                Ok(Directive::transition(target, payload))
            }
        }
    }
}

struct EssaySubmission {
    recorder: RegistrationRecorder,
}

impl ProcessBehavior for EssaySubmission {
    fn on_receive(&self, ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
        if env.kind != "essay_submission" {
            return Err(HookError::rejected("waiting for the essay"));
        }
        if env.actor.handle != data_str(ctx, "author") {
            return Err(HookError::rejected("only the author can submit the essay"));
        }
        let (Some(title), Some(body)) = (nonempty(env, "title"), nonempty(env, "body")) else {
            return Err(HookError::rejected("an essay needs a title and a body"));
        };
        ctx.model_mut().set(
            DATA_SECTION,
            "essay",
            json!({ "title": title, "body": body }),
        );
        self.recorder.update_status(ctx.model_mut(), "submitted");
        let mut summary = stored_summary(ctx);
        summary.status = "submitted".into();
        let target = pname(DISTRIBUTION);
        let payload = ctx
            .payload_to(&target)
            .with_summary(summary)
            .with_extra("essay_title", title)
            .with_extra("essay_body", body);
        Ok(Directive::transition(target, payload))
    }
}

struct Distribution {
    recorder: RegistrationRecorder,
}

impl ProcessBehavior for Distribution {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        incoming: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        let p = incoming.ok_or_else(|| HookError::Failed("distribution needs the essay".into()))?;
        let (Some(title), Some(body)) = (p.extra_str("essay_title"), p.extra_str("essay_body"))
        else {
            return Err(HookError::Failed("essay missing from payload".into()));
        };
        let supporters = contributors_in(ctx.model().get(DATA_SECTION, "pledges"));
        for (handle, _) in supporters {
            ctx.emit(Effect::SendEmail {
                to: handle,
                subject: format!("Your essay has arrived: {title}"),
                body: body.to_string(),
            });
        }
        ctx.emit(Effect::EscrowRelease);
        self.recorder
            .update_status(ctx.model_mut(), OUTCOME_FULFILLED);
        let mut payload = ctx.payload_terminal().with_summary(p.summary.clone());
        payload.summary.status = OUTCOME_FULFILLED.into();
        Ok(Directive::terminate(OUTCOME_FULFILLED, payload))
    }

    fn on_receive(
        &self,
        _ctx: &mut HookContext<'_>,
        _env: &InputEnvelope,
    ) -> HookResult<Directive> {
        Err(HookError::rejected("distribution takes no input"))
    }
}

fn same_project(
    inst_author: Option<&str>,
    inst_topic: Option<&str>,
    author: &str,
    topic: &str,
) -> bool {
    inst_author == Some(author) && inst_topic == Some(topic)
}

fn web_form_match(env: &InputEnvelope, view: &RegistryView<'_>) -> MatchResult {
    if let Some(id) = &env.correlation.agreement_id {
        let id = AgreementId(id.clone());
        return match view.get(&id) {
            Some(_) => MatchResult::Existing(id),
            None => MatchResult::Decline,
        };
    }
    let author = env.payload_str("author").map(str::trim).unwrap_or_default();
    let topic = env.payload_str("topic").map(str::trim).unwrap_or_default();
    let existing = view.find(|i| {
        i.is_active()
            && same_project(
                i.data_model.get_str(DATA_SECTION, "author"),
                i.data_model.get_str(DATA_SECTION, "topic"),
                author,
                topic,
            )
    });
    match (existing, env.kind.as_str()) {
        (Some(i), _) => MatchResult::Existing(i.id.clone()),
        (None, "pledge") => MatchResult::New,
        (None, _) => MatchResult::Decline,
    }
}

fn social_match(env: &InputEnvelope, view: &RegistryView<'_>) -> MatchResult {
    let awaiting = |i: &crate::engine::AgreementInstance| {
        i.is_in(AUTHOR_APPROVAL)
            && i.data_model.get_str(DATA_SECTION, "author") == Some(env.actor.handle.as_str())
    };
    if let Some(id) = &env.correlation.agreement_id {
        let id = AgreementId(id.clone());
        return match view.get(&id) {
            Some(i) if awaiting(i) => MatchResult::Existing(id),
            _ => MatchResult::Decline,
        };
    }
    match view.find(awaiting) {
        Some(i) => MatchResult::Existing(i.id.clone()),
        None => MatchResult::Decline,
    }
}

/// Pledges from a web form accumulate until they strictly exceed 500 units;
/// the author is then asked by direct message, funds go into escrow on
/// acceptance, the essay comes back through the web form, and every
/// supporter is emailed while escrow pays the author.
///
/// Envelopes: `web-form/pledge {author, topic, amount}`,
/// `social/dm {text: "accept"|"reject"}` from the author,
/// `web-form/essay_submission {author, topic, title, body}` from the author.
pub fn build_scarce_knowledge_path() -> PathDefinition {
    let summary_out = SUMMARY_FIELDS.iter().map(|s| s.to_string());
    let pledge = ProcessDefinition::new(
        pname(PLEDGE_AUTHORING),
        StageKind::Authoring,
        PledgeAuthoring {
            gate: ThresholdGate::new("amount", PLEDGE_THRESHOLD, pname(AUTHOR_APPROVAL))
                .expect("threshold is positive"),
        },
    )
    .with_contract(
        StageContract::default()
            .produces(summary_out.clone())
            .produces([
                AGREEMENT_REF,
                "extras.amount",
                "extras.contributors",
                "extras.author",
                "extras.topic",
            ])
            .target(pname(AUTHOR_APPROVAL))
            .terminates(),
    );
    let approval = ProcessDefinition::new(
        pname(AUTHOR_APPROVAL),
        StageKind::Registration,
        AuthorApproval {
            gate: ApprovalGate::new("author"),
            recorder: RegistrationRecorder::default(),
        },
    )
    .with_contract(
        StageContract::default()
            .consumes(SUMMARY_FIELDS)
            .produces(summary_out.clone())
            .produces([AGREEMENT_REF])
            .target(pname(ESSAY_SUBMISSION))
            .terminates(),
    );
    let essay = ProcessDefinition::new(
        pname(ESSAY_SUBMISSION),
        StageKind::Execution,
        EssaySubmission {
            recorder: RegistrationRecorder::default(),
        },
    )
    .with_contract(
        StageContract::default()
            .produces(summary_out)
            .produces([AGREEMENT_REF, "extras.essay_title", "extras.essay_body"])
            .target(pname(DISTRIBUTION)),
    );
    let distribution = ProcessDefinition::new(
        pname(DISTRIBUTION),
        StageKind::Enforcement,
        Distribution {
            recorder: RegistrationRecorder::default(),
        },
    )
    .with_contract(
        StageContract::default()
            .consumes(["extras.essay_title", "extras.essay_body"])
            .terminates(),
    );

    PathDefinition::builder(SCARCE_PATH)
        .process(pledge)
        .process(approval)
        .process(essay)
        .process(distribution)
        .init(PLEDGE_AUTHORING)
        .interface(InterfaceDefinition::new(
            "web-form",
            |env| {
                env.source == WEB_FORM && matches!(env.kind.as_str(), "pledge" | "essay_submission")
            },
            web_form_match,
        ))
        .interface(InterfaceDefinition::new(
            "social",
            |env| env.source == SOCIAL && env.kind == "dm",
            social_match,
        ))
        .build()
        .expect("the scarce knowledge path is well formed")
}

/// Handy for callers assembling pledge payloads.
pub fn pledge_payload(author: &str, topic: &str, amount: i64) -> Value {
    json!({ "author": author, "topic": topic, "amount": amount })
}

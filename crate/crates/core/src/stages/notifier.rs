use crate::engine::{
    Directive, Effect, HookContext, HookError, HookResult, ProcessBehavior, ProcessDefinition,
    StageContract,
};
use crate::model::{InputEnvelope, ProcessName};
use crate::stage::{StageKind, StagePayload};

use super::{ArchetypeError, ArchetypeKind, StageArchetype, DATA_SECTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Status,
    DirectMessage,
    Email,
}

impl Channel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "status" => Some(Self::Status),
            "dm" => Some(Self::DirectMessage),
            "email" => Some(Self::Email),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Status => "status",
            Self::DirectMessage => "dm",
            Self::Email => "email",
        }
    }
}

/// Sends one message on activation, then passes the payload on to `next`
/// (or waits when there is none).
///
/// `{id}` and `{status}` in the template are replaced with the agreement id
/// and the incoming summary status. For a status post, `address_key` names
/// the thread id in the model; otherwise the recipient handle or address.
#[derive(Debug, Clone)]
pub struct Notifier {
    pub channel: Channel,
    pub address_key: Option<String>,
    pub template: String,
    pub next: Option<ProcessName>,
}

impl Notifier {
    fn render(&self, ctx: &HookContext<'_>, incoming: Option<&StagePayload>) -> String {
        let status = incoming.map(|p| p.summary.status.as_str()).unwrap_or("");
        self.template
            .replace("{id}", ctx.agreement_id().as_str())
            .replace("{status}", status)
    }
}

impl ProcessBehavior for Notifier {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        incoming: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        let text = self.render(ctx, incoming);
        let address = self
            .address_key
            .as_deref()
            .and_then(|k| ctx.model().get_str(DATA_SECTION, k))
            .map(str::to_string);
        let effect = match (self.channel, address) {
            (Channel::Status, thread_id) => Effect::PostStatus { text, thread_id },
            (Channel::DirectMessage, Some(to)) => Effect::SendDm { to, text },
            (Channel::Email, Some(to)) => Effect::SendEmail {
                to,
                subject: format!("Agreement {}", ctx.agreement_id()),
                body: text,
            },
            (_, None) => return Err(HookError::Failed("notifier has no recipient".into())),
        };
        ctx.emit(effect);
        Ok(match &self.next {
            Some(next) => {
                let mut forward = incoming.cloned().unwrap_or_else(|| ctx.payload_to(next));
                forward.from_stage = ctx.own_stage();
                forward.to_stage = ctx.stage_of(next.as_str()).unwrap_or(forward.to_stage);
                Directive::transition(next.clone(), forward)
            }
            None => Directive::Wait,
        })
    }

    fn on_receive(
        &self,
        _ctx: &mut HookContext<'_>,
        _env: &InputEnvelope,
    ) -> HookResult<Directive> {
        Err(HookError::rejected("the notifier takes no input"))
    }
}

pub fn make_notifier(
    channel: Channel,
    address_key: Option<&str>,
    template: &str,
    next: Option<ProcessName>,
) -> Result<ProcessDefinition, ArchetypeError> {
    if channel != Channel::Status && address_key.is_none() {
        return Err(ArchetypeError::MissingParameter("address_key"));
    }
    let mut archetype = StageArchetype::new(ArchetypeKind::Notifier)
        .param("channel", channel.as_str())
        .param("template", template);
    if let Some(k) = address_key {
        archetype = archetype.param("address_key", k);
    }
    let mut contract = StageContract::default();
    if let Some(n) = &next {
        archetype = archetype.param("next", n.as_str());
        contract = contract.target(n.clone());
    }
    Ok(ProcessDefinition::new(
        ProcessName::new("Notifier").expect("valid token"),
        StageKind::Enforcement,
        Notifier {
            channel,
            address_key: address_key.map(str::to_string),
            template: template.to_string(),
            next,
        },
    )
    .with_contract(contract)
    .with_archetype(archetype))
}

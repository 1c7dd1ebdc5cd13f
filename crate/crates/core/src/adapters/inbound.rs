//! Turns raw social-platform events into canonical envelopes and posts them
//! to a path endpoint.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::DispatchOutcome;
use crate::model::{Actor, Correlation, WireEnvelope};

pub const SOCIAL_SOURCE: &str = "social";
pub const KEYWORD: &str = "agreement";
pub const DEFAULT_BOT: &str = "agreementengine";

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '@'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Whether the lowercase token `agreement` appears as a word.
pub fn has_keyword(text: &str) -> bool {
    words(text).any(|w| w == KEYWORD)
}

/// `@handle` tags in order of appearance, without the `@`, deduplicated.
pub fn tagged_handles(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for raw in text.split_whitespace() {
        let Some(rest) = raw.strip_prefix('@') else {
            continue;
        };
        let handle: String = rest
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        if !handle.is_empty() && !out.iter().any(|h| h.eq_ignore_ascii_case(&handle)) {
            out.push(handle);
        }
    }
    out
}

/// First tagged handle that is neither the bot nor the sender.
pub fn counterparty(text: &str, bot: &str, sender: &str) -> Option<String> {
    tagged_handles(text)
        .into_iter()
        .find(|h| !h.eq_ignore_ascii_case(bot) && !h.eq_ignore_ascii_case(sender))
}

/// Tagged handles other than the bot and the sender.
pub fn other_parties(text: &str, bot: &str, sender: &str) -> Vec<String> {
    tagged_handles(text)
        .into_iter()
        .filter(|h| !h.eq_ignore_ascii_case(bot) && !h.eq_ignore_ascii_case(sender))
        .collect()
}

/// First word that is `upheld` or `broken`, case-insensitively.
pub fn verdict_token(text: &str) -> Option<&'static str> {
    words(text).find_map(|w| match w.as_str() {
        "upheld" => Some("upheld"),
        "broken" => Some("broken"),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlatformEventKind {
    Status,
    Reply,
    Dm,
}

/// A raw event as the mock social platform would deliver it by webhook.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformEvent {
    pub kind: PlatformEventKind,
    pub actor: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_id: Option<String>,
}

impl PlatformEvent {
    pub fn status(actor: &str, text: &str) -> Self {
        Self {
            kind: PlatformEventKind::Status,
            actor: actor.into(),
            text: text.into(),
            thread_id: None,
        }
    }

    pub fn reply(actor: &str, text: &str, thread_id: &str) -> Self {
        Self {
            kind: PlatformEventKind::Reply,
            actor: actor.into(),
            text: text.into(),
            thread_id: Some(thread_id.into()),
        }
    }

    pub fn dm(actor: &str, text: &str) -> Self {
        Self {
            kind: PlatformEventKind::Dm,
            actor: actor.into(),
            text: text.into(),
            thread_id: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InjectError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {body}")]
    Status { status: u16, body: String },
}

/// Normalizes social events. New statuses without a thread get ids
/// `st-1`, `st-2`, ... from this adapter.
#[derive(Debug)]
pub struct SocialInbound {
    bot: String,
    next_status: AtomicU64,
}

impl Default for SocialInbound {
    fn default() -> Self {
        Self::new(DEFAULT_BOT)
    }
}

impl SocialInbound {
    pub fn new(bot: &str) -> Self {
        Self {
            bot: bot.to_string(),
            next_status: AtomicU64::new(1),
        }
    }

    pub fn normalize(&self, event: &PlatformEvent) -> WireEnvelope {
        let actor = Actor::new(SOCIAL_SOURCE, event.actor.clone());
        let (kind, payload, thread) = match event.kind {
            PlatformEventKind::Status => {
                let thread = event.thread_id.clone().unwrap_or_else(|| {
                    format!("st-{}", self.next_status.fetch_add(1, Ordering::Relaxed))
                });
                let mentions = other_parties(&event.text, &self.bot, &event.actor);
                let payload = json!({
                    "text": event.text,
                    "keyword": has_keyword(&event.text),
                    "mentions": mentions,
                    "counterparty": counterparty(&event.text, &self.bot, &event.actor),
                });
                ("status_mention", payload, Some(thread))
            }
            PlatformEventKind::Reply => {
                let kind = if words(&event.text).any(|w| w == "abandon") {
                    "abandon"
                } else {
                    "reply"
                };
                let payload = json!({
                    "text": event.text,
                    "verdict": verdict_token(&event.text),
                });
                (kind, payload, event.thread_id.clone())
            }
            PlatformEventKind::Dm => ("dm", json!({ "text": event.text }), event.thread_id.clone()),
        };
        WireEnvelope {
            source: SOCIAL_SOURCE.into(),
            kind: kind.into(),
            actor,
            payload: strip_nulls(payload),
            correlation: thread.map(Correlation::thread),
            received_at: None,
        }
    }

    /// Normalizes `event` and POSTs it to `{base_url}/{path}`.
    pub async fn inject_inbound(
        &self,
        client: &reqwest::Client,
        base_url: &str,
        path: &str,
        event: &PlatformEvent,
    ) -> Result<DispatchOutcome, InjectError> {
        post_envelope(client, base_url, path, &self.normalize(event)).await
    }
}

/// POSTs a canonical envelope and decodes the dispatch outcome.
pub async fn post_envelope(
    client: &reqwest::Client,
    base_url: &str,
    path: &str,
    envelope: &WireEnvelope,
) -> Result<DispatchOutcome, InjectError> {
    let url = format!("{}/{}", base_url.trim_end_matches('/'), path);
    let resp = client.post(url).json(envelope).send().await?;
    let status = resp.status();
    if !status.is_success() {
        let body = resp.text().await.unwrap_or_default();
        return Err(InjectError::Status {
            status: status.as_u16(),
            body,
        });
    }
    Ok(resp.json().await?)
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        other => other,
    }
}

//! Mock external platforms with inspectable outboxes: a social platform,
//! a mailer and an escrow ledger, plus inbound-event normalization.

mod escrow;
pub mod inbound;
mod social;

use std::sync::{Mutex, MutexGuard};

use serde::Serialize;

use crate::engine::{Effect, EffectRejected, EffectSink};
use crate::model::AgreementId;

pub use escrow::{EscrowLedger, Hold, Settlement};
pub use social::{Mailer, OutboxEntry, SocialPlatform};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("recipient must not be empty")]
    EmptyRecipient,
    #[error("message text must not be empty")]
    EmptyText,
    #[error("{handle} needs {needed} units but has {available}")]
    InsufficientFunds {
        handle: String,
        needed: i64,
        available: i64,
    },
    #[error("negative amount {0}")]
    NegativeAmount(i64),
    #[error("no escrow hold for {0}")]
    UnknownHold(String),
    #[error("escrow for {0} was already settled")]
    DoubleSettle(String),
    #[error("escrow for {0} already exists")]
    DuplicateHold(String),
}

#[derive(Debug, Default)]
struct HubState {
    social: SocialPlatform,
    mail: Mailer,
    escrow: EscrowLedger,
}

/// All mock platforms behind one lock, so a batch of effects lands
/// atomically.
#[derive(Debug, Default)]
pub struct MockHub {
    state: Mutex<HubState>,
}

/// Escrow inspection view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EscrowView {
    pub balances: std::collections::BTreeMap<String, i64>,
    pub holds: std::collections::BTreeMap<String, Hold>,
    pub settled: std::collections::BTreeMap<String, Settlement>,
    pub total: i64,
}

impl MockHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_escrow(escrow: EscrowLedger) -> Self {
        Self {
            state: Mutex::new(HubState {
                escrow,
                ..HubState::default()
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, HubState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn post_status(&self, text: &str, thread_id: Option<&str>) -> Result<String, AdapterError> {
        self.lock().social.post_status(text, thread_id)
    }

    pub fn send_dm(&self, to: &str, text: &str) -> Result<(), AdapterError> {
        self.lock().social.send_dm(to, text)
    }

    pub fn send_email(&self, to: &str, subject: &str, body: &str) -> Result<(), AdapterError> {
        self.lock().mail.send_email(to, subject, body)
    }

    pub fn social_outbox(&self) -> Vec<OutboxEntry> {
        self.lock().social.outbox().to_vec()
    }

    pub fn mail_outbox(&self) -> Vec<OutboxEntry> {
        self.lock().mail.outbox().to_vec()
    }

    pub fn escrow(&self) -> EscrowLedger {
        self.lock().escrow.clone()
    }

    pub fn escrow_view(&self) -> EscrowView {
        let l = self.escrow();
        EscrowView {
            total: l.total(),
            balances: l.balances,
            holds: l.holds,
            settled: l.settled,
        }
    }

    pub fn dms_to(&self, handle: &str) -> Vec<String> {
        self.social_outbox()
            .into_iter()
            .filter_map(|e| match e {
                OutboxEntry::DirectMessage { to, text } if to == handle => Some(text),
                _ => None,
            })
            .collect()
    }

    pub fn status_posts(&self) -> Vec<(String, Option<String>)> {
        self.social_outbox()
            .into_iter()
            .filter_map(|e| match e {
                OutboxEntry::StatusPost {
                    text, thread_id, ..
                } => Some((text, thread_id)),
                _ => None,
            })
            .collect()
    }

    pub fn email_recipients(&self) -> Vec<String> {
        self.mail_outbox()
            .into_iter()
            .filter_map(|e| match e {
                OutboxEntry::Email { to, .. } => Some(to),
                _ => None,
            })
            .collect()
    }
}

impl EffectSink for MockHub {
    /// Applies the batch to a copy of every platform and swaps the copies in
    /// only if every effect succeeded.
    fn commit(&self, agreement: &AgreementId, effects: &[Effect]) -> Result<(), EffectRejected> {
        if effects.is_empty() {
            return Ok(());
        }
        let mut guard = self.lock();
        let mut social = guard.social.clone();
        let mut mail = guard.mail.clone();
        let mut escrow = guard.escrow.clone();
        let id = agreement.as_str();
        for e in effects {
            let res = match e {
                Effect::PostStatus { text, thread_id } => {
                    social.post_status(text, thread_id.as_deref()).map(|_| ())
                }
                Effect::SendDm { to, text } => social.send_dm(to, text),
                Effect::SendEmail { to, subject, body } => mail.send_email(to, subject, body),
                Effect::EscrowHold {
                    contributions,
                    beneficiary,
                } => escrow.hold(id, contributions, beneficiary),
                Effect::EscrowRelease => escrow.release(id).map(|_| ()),
                Effect::EscrowRefund => escrow.refund(id).map(|_| ()),
            };
            res.map_err(|err| EffectRejected(err.to_string()))?;
        }
        guard.social = social;
        guard.mail = mail;
        guard.escrow = escrow;
        Ok(())
    }
}

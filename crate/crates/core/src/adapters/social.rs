use serde::{Deserialize, Serialize};

use super::AdapterError;

/// One outbound effect, in emission order. Entries are never modified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum OutboxEntry {
    StatusPost {
        id: String,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thread_id: Option<String>,
    },
    DirectMessage {
        to: String,
        text: String,
    },
    Email {
        to: String,
        subject: String,
        body: String,
    },
}

/// Mock social platform: public statuses and direct messages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SocialPlatform {
    outbox: Vec<OutboxEntry>,
    next_status: u64,
}

impl SocialPlatform {
    pub fn post_status(
        &mut self,
        text: &str,
        thread_id: Option<&str>,
    ) -> Result<String, AdapterError> {
        if text.trim().is_empty() {
            return Err(AdapterError::EmptyText);
        }
        self.next_status += 1;
        let id = format!("post-{}", self.next_status);
        self.outbox.push(OutboxEntry::StatusPost {
            id: id.clone(),
            text: text.to_string(),
            thread_id: thread_id.map(str::to_string),
        });
        Ok(id)
    }

    pub fn send_dm(&mut self, to: &str, text: &str) -> Result<(), AdapterError> {
        if to.trim().is_empty() {
            return Err(AdapterError::EmptyRecipient);
        }
        if text.trim().is_empty() {
            return Err(AdapterError::EmptyText);
        }
        self.outbox.push(OutboxEntry::DirectMessage {
            to: to.to_string(),
            text: text.to_string(),
        });
        Ok(())
    }

    pub fn outbox(&self) -> &[OutboxEntry] {
        &self.outbox
    }
}

/// Mock mail automation service.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Mailer {
    outbox: Vec<OutboxEntry>,
}

impl Mailer {
    pub fn send_email(&mut self, to: &str, subject: &str, body: &str) -> Result<(), AdapterError> {
        if to.trim().is_empty() {
            return Err(AdapterError::EmptyRecipient);
        }
        self.outbox.push(OutboxEntry::Email {
            to: to.to_string(),
            subject: subject.to_string(),
            body: body.to_string(),
        });
        Ok(())
    }

    pub fn outbox(&self) -> &[OutboxEntry] {
        &self.outbox
    }
}

//! Shared value types: name tokens, timestamps, the per-instance data model
//! and the normalized inbound envelope.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Returns true when `s` is a non-empty URL-safe token (letters, digits, `_`, `-`).
pub fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

macro_rules! token_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            /// Validates `s` as a URL-safe token.
            pub fn new(s: impl Into<String>) -> Result<Self, InvalidToken> {
                let s = s.into();
                if is_token(&s) {
                    Ok(Self(s))
                } else {
                    Err(InvalidToken(s))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                Self::new(s).map_err(serde::de::Error::custom)
            }
        }
    };
}

token_newtype!(
    /// Name of a process, unique within its path.
    ProcessName
);
token_newtype!(
    /// Name of an agreement path; also its URL segment.
    PathName
);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0:?} is not a valid token (letters, digits, '_' or '-')")]
pub struct InvalidToken(pub String);

/// Opaque agreement identifier, `<path>-<counter>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgreementId(pub String);

impl AgreementId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgreementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgreementId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// UTC instant at one-second resolution, serialized as `YYYY-MM-DDTHH:MM:SSZ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_unix(secs: i64) -> Self {
        Self(secs)
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    pub fn now() -> Self {
        Self(Utc::now().timestamp())
    }

    pub fn plus_secs(self, secs: i64) -> Self {
        Self(self.0 + secs)
    }

    fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_opt(self.0, 0)
            .single()
            .unwrap_or(DateTime::<Utc>::MIN_UTC)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format(TIMESTAMP_FORMAT))
    }
}

impl std::str::FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let naive = NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)?;
        Ok(Self(naive.and_utc().timestamp()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-instance data model: `section -> key -> value`.
///
/// Sections are created on first write. Amounts are stored as JSON integers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataModel {
    sections: BTreeMap<String, BTreeMap<String, Value>>,
}

impl DataModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Last write wins per `(section, key)`.
    pub fn set(&mut self, section: &str, key: &str, value: impl Into<Value>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.sections.get(section)?.get(key)
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key)?.as_str()
    }

    pub fn get_i64(&self, section: &str, key: &str) -> Option<i64> {
        self.get(section, key)?.as_i64()
    }

    pub fn section(&self, section: &str) -> Option<&BTreeMap<String, Value>> {
        self.sections.get(section)
    }

    pub fn sections(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, Value>)> {
        self.sections.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Actor {
    pub platform: String,
    pub handle: String,
}

impl Actor {
    pub fn new(platform: impl Into<String>, handle: impl Into<String>) -> Self {
        Self {
            platform: platform.into(),
            handle: handle.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correlation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_id: Option<String>,
}

impl Correlation {
    pub fn is_empty(&self) -> bool {
        self.agreement_id.is_none() && self.thread_id.is_none()
    }

    pub fn thread(thread_id: impl Into<String>) -> Self {
        Self {
            agreement_id: None,
            thread_id: Some(thread_id.into()),
        }
    }
}

/// Normalized inbound event, whatever platform it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEnvelope {
    pub source: String,
    pub kind: String,
    pub actor: Actor,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Correlation::is_empty")]
    pub correlation: Correlation,
    pub received_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("envelope field `{0}` must be non-empty")]
    EmptyField(&'static str),
}

impl InputEnvelope {
    pub fn new(
        source: impl Into<String>,
        kind: impl Into<String>,
        actor: Actor,
        payload: Value,
        received_at: Timestamp,
    ) -> Self {
        Self {
            source: source.into(),
            kind: kind.into(),
            actor,
            payload,
            correlation: Correlation::default(),
            received_at,
        }
    }

    pub fn with_correlation(mut self, correlation: Correlation) -> Self {
        self.correlation = correlation;
        self
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        if self.source.trim().is_empty() {
            return Err(EnvelopeError::EmptyField("source"));
        }
        if self.kind.trim().is_empty() {
            return Err(EnvelopeError::EmptyField("kind"));
        }
        if self.actor.handle.trim().is_empty() {
            return Err(EnvelopeError::EmptyField("actor.handle"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (sorted-key) JSON encoding.
    pub fn digest(&self) -> String {
        let canonical = canonical_json(self);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn payload_str(&self, key: &str) -> Option<&str> {
        self.payload.get(key)?.as_str()
    }
}

/// The envelope as accepted on the wire: `received_at` may be omitted and is
/// stamped by the server clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEnvelope {
    pub source: String,
    pub kind: String,
    pub actor: Actor,
    #[serde(default)]
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Correlation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub received_at: Option<Timestamp>,
}

impl WireEnvelope {
    pub fn stamp(self, now: Timestamp) -> InputEnvelope {
        InputEnvelope {
            source: self.source,
            kind: self.kind,
            actor: self.actor,
            payload: self.payload,
            correlation: self.correlation.unwrap_or_default(),
            received_at: self.received_at.unwrap_or(now),
        }
    }
}

impl From<InputEnvelope> for WireEnvelope {
    fn from(env: InputEnvelope) -> Self {
        Self {
            source: env.source,
            kind: env.kind,
            actor: env.actor,
            payload: env.payload,
            correlation: (!env.correlation.is_empty()).then_some(env.correlation),
            received_at: Some(env.received_at),
        }
    }
}

/// Serializes through `serde_json::Value`, whose object maps are ordered, so
/// keys come out sorted at every level.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("model types always serialize");
    serde_json::to_string(&value).expect("values always serialize")
}

//! Envelope builders and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use agreement_engine::adapters::inbound::{PlatformEvent, SocialInbound, DEFAULT_BOT};
use agreement_engine::adapters::MockHub;
use agreement_engine::engine::{Engine, EngineError, IdGenerator};
use agreement_engine::model::{Actor, Correlation, InputEnvelope, Timestamp, WireEnvelope};
use agreement_engine::paths::{demo_escrow, pledge_payload, reference_paths};
use agreement_engine::runtime::DEMO_EPOCH;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn at(n: i64) -> Timestamp {
    Timestamp::from_unix(DEMO_EPOCH + n)
}

pub fn pledge(supporter: &str, author: &str, topic: &str, amount: i64, n: i64) -> InputEnvelope {
    InputEnvelope::new(
        "web-form",
        "pledge",
        Actor::new("web", supporter),
        pledge_payload(author, topic, amount),
        at(n),
    )
}

pub fn dm(from: &str, text: &str, n: i64) -> InputEnvelope {
    InputEnvelope::new(
        "social",
        "dm",
        Actor::new("social", from),
        json!({ "text": text }),
        at(n),
    )
}

pub fn essay(author: &str, topic: &str, title: &str, body: &str, n: i64) -> InputEnvelope {
    InputEnvelope::new(
        "web-form",
        "essay_submission",
        Actor::new("web", author),
        json!({ "author": author, "topic": topic, "title": title, "body": body }),
        at(n),
    )
}

pub fn social(inbound: &SocialInbound, event: PlatformEvent, n: i64) -> InputEnvelope {
    inbound.normalize(&event).stamp(at(n))
}

pub fn reply(who: &str, text: &str, thread: &str, n: i64) -> InputEnvelope {
    SocialInbound::default()
        .normalize(&PlatformEvent::reply(who, text, thread))
        .stamp(at(n))
}

pub fn with_agreement(env: InputEnvelope, id: &str) -> InputEnvelope {
    env.with_correlation(Correlation {
        agreement_id: Some(id.into()),
        thread_id: None,
    })
}

/// Engine with both reference paths and a hub holding the demo balances.
pub fn engine() -> (Engine, Arc<MockHub>) {
    engine_seeded(1)
}

pub fn engine_seeded(seed: u64) -> (Engine, Arc<MockHub>) {
    let hub = Arc::new(MockHub::with_escrow(demo_escrow()));
    let mut e = Engine::with_ids(hub.clone(), IdGenerator::starting_at(seed));
    for p in reference_paths() {
        e.register_path(p).unwrap();
    }
    (e, hub)
}

pub fn unstamped(env: InputEnvelope) -> WireEnvelope {
    WireEnvelope {
        received_at: None,
        ..env.into()
    }
}

const SUPPORTERS: [&str; 4] = ["s1", "s2", "s3", "s4"];
const AUTHORS: [&str; 2] = ["authorA", "authorB"];
const TOPICS: [&str; 2] = ["commons", "tides"];
const PEOPLE: [&str; 3] = ["alice", "bob", "carol"];

/// A reproducible mix of plausible traffic for both reference paths.
/// Envelopes carry no `received_at`, so the caller stamps them.
pub fn workload(seed: u64, len: usize) -> Vec<(&'static str, WireEnvelope)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inbound = SocialInbound::default();
    let mut threads = 0u32;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let author = *AUTHORS.choose(&mut rng).unwrap();
        let topic = *TOPICS.choose(&mut rng).unwrap();
        let item = match rng.random_range(0..10) {
            0..=3 => {
                let supporter = *SUPPORTERS.choose(&mut rng).unwrap();
                let amount = rng.random_range(-10..400);
                let wire = unstamped(pledge(supporter, author, topic, amount, 0));
                ("scarce", wire)
            }
            4 => {
                let text = *["accept", "reject", "maybe"].choose(&mut rng).unwrap();
                let from = if rng.random_bool(0.8) { author } else { "s1" };
                ("scarce", unstamped(dm(from, text, 0)))
            }
            5 => (
                "scarce",
                unstamped(essay(author, topic, "Title", "Body text", 0)),
            ),
            6 => {
                let who = *PEOPLE.choose(&mut rng).unwrap();
                let other = *PEOPLE.choose(&mut rng).unwrap();
                let text = format!(
                    "@{DEFAULT_BOT} agreement with @{other}: deliver {}",
                    rng.random_range(0..100)
                );
                threads += 1;
                ("tsc", inbound.normalize(&PlatformEvent::status(who, &text)))
            }
            _ => {
                let who = *PEOPLE.choose(&mut rng).unwrap();
                let text = *["upheld", "broken", "abandon", "hello"]
                    .choose(&mut rng)
                    .unwrap();
                let thread = format!("st-{}", rng.random_range(1..=threads.max(1)));
                (
                    "tsc",
                    inbound.normalize(&PlatformEvent::reply(who, text, &thread)),
                )
            }
        };
        out.push(item);
    }
    out
}

/// Like [`workload`] but a share of envelopes are junk: unknown sources and
/// kinds, wrong payload types, missing fields, bogus correlations.
pub fn fuzzed(seed: u64, len: usize) -> Vec<(&'static str, WireEnvelope)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut base = workload(seed, len);
    for (path, wire) in base.iter_mut() {
        if rng.random_bool(0.5) {
            *path = if rng.random_bool(0.5) {
                "scarce"
            } else {
                "tsc"
            };
        }
        match rng.random_range(0..8) {
            0 => {
                wire.source = ["web-form", "social", "console", ""]
                    .choose(&mut rng)
                    .unwrap()
                    .to_string()
            }
            1 => {
                wire.kind = [
                    "pledge",
                    "dm",
                    "reply",
                    "abandon",
                    "status_mention",
                    "essay_submission",
                    "x",
                ]
                .choose(&mut rng)
                .unwrap()
                .to_string()
            }
            2 => wire.payload = json!({}),
            3 => {
                wire.payload =
                    json!({ "amount": "lots", "text": 7, "topic": null, "mentions": "bob" })
            }
            4 => {
                let id = format!("{}-{}", path, rng.random_range(0..6));
                wire.correlation = Some(Correlation {
                    agreement_id: Some(id),
                    thread_id: None,
                });
            }
            5 => {
                wire.actor.handle = ["", "ghost", "agreementengine"]
                    .choose(&mut rng)
                    .unwrap()
                    .to_string()
            }
            _ => {}
        }
    }
    base
}

/// Dispatches stamped items directly into an engine, treating hook failures
/// as rejections. Returns the number of envelopes that created or changed
/// something.
pub fn drive(engine: &mut Engine, items: &[(&'static str, WireEnvelope)]) -> usize {
    let mut mutated = 0;
    for (i, (path, wire)) in items.iter().enumerate() {
        match engine.dispatch(path, &wire.clone().stamp(at(i as i64))) {
            Ok(o) if o.disposition.mutates() => mutated += 1,
            Ok(_) => {}
            Err(e) if e.is_hook_failure() || matches!(e, EngineError::InvalidEnvelope(_)) => {}
            Err(e) => panic!("unexpected engine error: {e}"),
        }
    }
    mutated
}

//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use agreement_engine::adapters::inbound::{PlatformEvent, SocialInbound};
use agreement_engine::adapters::MockHub;
use agreement_engine::engine::IdGenerator;
use agreement_engine::model::{Actor, InputEnvelope, Timestamp};
use agreement_engine::paths::{
    demo_escrow, pledge_payload, reference_paths, SCARCE_PATH, TSC_PATH,
};
use agreement_engine::runtime::DEMO_EPOCH;
use agreement_engine::Engine;
use serde_json::json;

pub fn engine() -> Engine {
    let mut e = Engine::with_ids(
        Arc::new(MockHub::with_escrow(demo_escrow())),
        IdGenerator::starting_at(1),
    );
    for p in reference_paths() {
        e.register_path(p).expect("reference paths register");
    }
    e
}

fn at(n: usize) -> Timestamp {
    Timestamp::from_unix(DEMO_EPOCH + n as i64)
}

/// One full Scarce Knowledge agreement for `author`: three pledges, the
/// author's acceptance and the essay.
pub fn scarce_flow(author: &str, start: usize) -> Vec<(&'static str, InputEnvelope)> {
    let web = |kind: &str, who: &str, payload, n| {
        (
            SCARCE_PATH,
            InputEnvelope::new("web-form", kind, Actor::new("web", who), payload, at(n)),
        )
    };
    let topic = "bench";
    vec![
        web("pledge", "s1", pledge_payload(author, topic, 200), start),
        web(
            "pledge",
            "s2",
            pledge_payload(author, topic, 250),
            start + 1,
        ),
        web(
            "pledge",
            "s3",
            pledge_payload(author, topic, 100),
            start + 2,
        ),
        (
            SCARCE_PATH,
            InputEnvelope::new(
                "social",
                "dm",
                Actor::new("social", author),
                json!({ "text": "accept" }),
                at(start + 3),
            ),
        ),
        web(
            "essay_submission",
            author,
            json!({ "author": author, "topic": topic, "title": "T", "body": "B" }),
            start + 4,
        ),
    ]
}

/// One TSC agreement that goes through a dispute before settling.
pub fn tsc_flow(
    inbound: &SocialInbound,
    thread: &str,
    start: usize,
) -> Vec<(&'static str, InputEnvelope)> {
    let mut mention = PlatformEvent::status("alice", "@agreementengine agreement with @bob: bench");
    mention.thread_id = Some(thread.to_string());
    let mut events = vec![mention];
    for (who, v) in [("alice", "upheld"), ("bob", "broken"), ("bob", "upheld")] {
        events.push(PlatformEvent::reply(who, v, thread));
    }
    events
        .iter()
        .enumerate()
        .map(|(i, ev)| (TSC_PATH, inbound.normalize(ev).stamp(at(start + i))))
        .collect()
}

/// `n` interleaved agreements of both kinds.
pub fn mixed(n: usize) -> Vec<(&'static str, InputEnvelope)> {
    let inbound = SocialInbound::default();
    let mut out = Vec::new();
    for i in 0..n {
        out.extend(scarce_flow(&format!("author{i}"), out.len()));
        out.extend(tsc_flow(&inbound, &format!("t{i}"), out.len()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_complete() {
        let mut e = engine();
        let mut outcomes = Vec::new();
        for (path, env) in mixed(3) {
            if let Some(o) = e.dispatch(path, &env).unwrap().outcome {
                outcomes.push(o);
            }
        }
        assert_eq!(outcomes, ["fulfilled", "upheld"].repeat(3));
    }
}

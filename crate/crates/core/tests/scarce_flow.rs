mod common;

use agreement_engine::engine::Disposition;
use agreement_engine::model::AgreementId;
use agreement_engine::paths::{build_scarce_knowledge_path, SCARCE_PATH};
use agreement_engine::stages::REGISTRATION_SECTION;
use common::*;
use proptest::prelude::*;
use serde_json::json;

const AUTHOR: &str = "authorA";
const TOPIC: &str = "commons governance";

fn id() -> AgreementId {
    AgreementId::from("scarce-1")
}

#[test]
fn happy_path_releases_escrow_and_emails_supporters() {
    let (mut e, hub) = engine();
    let total_before = hub.escrow().total();
    let d = |e: &mut agreement_engine::Engine, env| e.dispatch(SCARCE_PATH, &env).unwrap();

    assert_eq!(
        d(&mut e, pledge("s1", AUTHOR, TOPIC, 200, 1)).disposition,
        Disposition::Created
    );
    assert_eq!(
        d(&mut e, pledge("s2", AUTHOR, TOPIC, 250, 2)).disposition,
        Disposition::Delivered
    );
    assert!(hub.dms_to(AUTHOR).is_empty());
    let out = d(&mut e, pledge("s3", AUTHOR, TOPIC, 100, 3));
    assert_eq!(out.active_process.unwrap(), "AuthorApproval");
    let dms = hub.dms_to(AUTHOR);
    assert_eq!(dms.len(), 1);
    assert!(dms[0].starts_with("You have a $550 bounty"), "{}", dms[0]);

    // Pledges are closed while the author decides.
    assert_eq!(
        d(&mut e, pledge("s1", AUTHOR, TOPIC, 50, 4)).disposition,
        Disposition::Rejected
    );
    // Someone else cannot accept.
    assert_eq!(
        d(&mut e, dm("mallory", "accept", 5)).disposition,
        Disposition::Rejected
    );

    let out = d(&mut e, dm(AUTHOR, "accept", 6));
    assert_eq!(out.active_process.unwrap(), "EssaySubmission");
    let ledger = hub.escrow();
    assert_eq!(ledger.holds["scarce-1"].amount, 550);
    assert_eq!(ledger.balance("s1"), 800);

    // Only the author can submit, and the essay needs a body.
    let mut forged = essay(AUTHOR, TOPIC, "Commons", "text", 7);
    forged.actor.handle = "s1".into();
    assert_eq!(d(&mut e, forged).disposition, Disposition::Rejected);
    assert_eq!(
        d(&mut e, essay(AUTHOR, TOPIC, "Commons", " ", 8)).disposition,
        Disposition::Rejected
    );

    let out = d(
        &mut e,
        essay(AUTHOR, TOPIC, "Commons", "Long essay body", 9),
    );
    assert_eq!(out.outcome.as_deref(), Some("fulfilled"));

    let ledger = hub.escrow();
    assert_eq!(ledger.balance(AUTHOR), 550);
    assert_eq!(ledger.total(), total_before);
    let mut recipients = hub.email_recipients();
    recipients.sort();
    assert_eq!(recipients, vec!["s1", "s2", "s3"]);
    assert_eq!(hub.dms_to(AUTHOR).len(), 1);

    let inst = e.instance(SCARCE_PATH, &id()).unwrap();
    inst.validate_walk_on(&build_scarce_knowledge_path())
        .unwrap();
    let walk: Vec<_> = inst
        .history
        .iter()
        .map(|r| r.to_process.as_ref().map(|p| p.to_string()))
        .collect();
    assert_eq!(
        walk,
        vec![
            Some("PledgeAuthoring".into()),
            Some("AuthorApproval".into()),
            Some("EssaySubmission".into()),
            Some("Distribution".into()),
            None
        ]
    );
    assert_eq!(
        inst.model_get(REGISTRATION_SECTION, "status"),
        Some(&json!("fulfilled"))
    );
    assert_eq!(inst.model_get("data", "total"), Some(&json!(550)));

    // Late input is ignored.
    let out = d(
        &mut e,
        with_agreement(pledge("s1", AUTHOR, TOPIC, 10, 10), "scarce-1"),
    );
    assert_eq!(out.disposition, Disposition::IgnoredTerminated);
}

#[test]
fn author_rejects() {
    let (mut e, hub) = engine();
    for (i, (s, a)) in [("s1", 300), ("s2", 300)].into_iter().enumerate() {
        e.dispatch(SCARCE_PATH, &pledge(s, AUTHOR, TOPIC, a, i as i64))
            .unwrap();
    }
    let out = e.dispatch(SCARCE_PATH, &dm(AUTHOR, "reject", 5)).unwrap();
    assert_eq!(out.outcome.as_deref(), Some("declined"));
    assert!(hub.email_recipients().is_empty());
    assert!(hub.escrow().holds.is_empty());
    assert_eq!(hub.escrow().balance("s1"), 1000);
}

#[test]
fn invalid_creating_pledges_terminate() {
    let (mut e, _) = engine();
    let out = e
        .dispatch(SCARCE_PATH, &pledge("s1", AUTHOR, TOPIC, -5, 1))
        .unwrap();
    assert_eq!(out.disposition, Disposition::Created);
    assert_eq!(out.outcome.as_deref(), Some("invalid"));

    let mut no_topic = pledge("s1", AUTHOR, "", 100, 2);
    no_topic.payload["topic"] = json!("");
    let out = e.dispatch(SCARCE_PATH, &no_topic).unwrap();
    assert_eq!(out.outcome.as_deref(), Some("invalid"));

    // An essay for an unknown project opens nothing.
    let out = e
        .dispatch(SCARCE_PATH, &essay(AUTHOR, TOPIC, "t", "b", 3))
        .unwrap();
    assert_eq!(out.disposition, Disposition::Rejected);
    // Neither does a DM nobody is waiting for.
    let out = e.dispatch(SCARCE_PATH, &dm(AUTHOR, "accept", 4)).unwrap();
    assert_eq!(out.disposition, Disposition::Rejected);
}

#[test]
fn insufficient_funds_refuse_acceptance() {
    let (mut e, hub) = engine();
    // "s9" has no balance in the demo ledger.
    e.dispatch(SCARCE_PATH, &pledge("s9", AUTHOR, TOPIC, 600, 1))
        .unwrap();
    let before = e.snapshot();
    let out = e.dispatch(SCARCE_PATH, &dm(AUTHOR, "accept", 2)).unwrap();
    assert_eq!(out.disposition, Disposition::Rejected);
    assert!(out.reason.unwrap().contains("s9"));
    assert_eq!(e.snapshot(), before);
    assert!(hub.escrow().holds.is_empty());
}

#[test]
fn separate_projects_stay_separate() {
    let (mut e, _) = engine();
    e.dispatch(SCARCE_PATH, &pledge("s1", AUTHOR, "one", 100, 1))
        .unwrap();
    e.dispatch(SCARCE_PATH, &pledge("s1", AUTHOR, "two", 100, 2))
        .unwrap();
    e.dispatch(SCARCE_PATH, &pledge("s2", "authorB", "one", 100, 3))
        .unwrap();
    assert_eq!(e.instances(SCARCE_PATH).unwrap().count(), 3);
    let out = e
        .dispatch(SCARCE_PATH, &pledge("s2", AUTHOR, "two", 50, 4))
        .unwrap();
    assert_eq!(out.agreement_id.unwrap().as_str(), "scarce-2");
}

#[derive(Debug, Clone)]
enum Step {
    Pledge(usize, i64),
    Dm(bool, &'static str),
    Essay(bool),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        4 => (0usize..3, -20i64..300).prop_map(|(s, a)| Step::Pledge(s, a)),
        2 => (any::<bool>(), prop_oneof![Just("accept"), Just("reject"), Just("hmm")])
            .prop_map(|(me, t)| Step::Dm(me, t)),
        1 => any::<bool>().prop_map(Step::Essay),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scarce_invariants(steps in prop::collection::vec(step(), 1..25)) {
        let (mut e, hub) = engine();
        let total = hub.escrow().total();
        for (n, s) in steps.iter().enumerate() {
            let n = n as i64;
            let env = match s {
                Step::Pledge(who, a) => pledge(["s1", "s2", "s3"][*who], AUTHOR, TOPIC, *a, n),
                Step::Dm(me, t) => dm(if *me { AUTHOR } else { "other" }, t, n),
                Step::Essay(me) => {
                    let mut env = essay(AUTHOR, TOPIC, "T", "B", n);
                    if !me {
                        env.actor.handle = "other".into();
                    }
                    env
                }
            };
            let out = e.dispatch(SCARCE_PATH, &env).unwrap();
            prop_assert!(matches!(
                out.disposition,
                Disposition::Created | Disposition::Delivered | Disposition::Rejected | Disposition::IgnoredTerminated
            ));
        }
        let path = build_scarce_knowledge_path();
        let mut fulfilled = 0;
        for inst in e.instances(SCARCE_PATH).unwrap() {
            inst.validate_walk_on(&path).unwrap();
            let pledged: i64 = inst
                .model_get("data", "pledges")
                .and_then(|v| v.as_array().cloned())
                .unwrap_or_default()
                .iter()
                .map(|p| p["amount"].as_i64().unwrap())
                .sum();
            prop_assert_eq!(inst.model_get("data", "total").and_then(|v| v.as_i64()).unwrap_or(0), pledged);
            let asked = inst.history.iter().any(|r| r.to_process.as_ref().is_some_and(|p| p == "AuthorApproval"));
            prop_assert_eq!(asked, pledged > 500);
            if inst.outcome() == Some("fulfilled") {
                fulfilled += 1;
            }
        }
        // One DM per instance that reached the author.
        let asked_count = e
            .instances(SCARCE_PATH)
            .unwrap()
            .filter(|i| i.history.iter().any(|r| r.to_process.as_ref().is_some_and(|p| p == "AuthorApproval")))
            .count();
        prop_assert_eq!(hub.dms_to(AUTHOR).len(), asked_count);
        prop_assert_eq!(hub.email_recipients().is_empty(), fulfilled == 0);
        prop_assert_eq!(hub.escrow().total(), total);
    }
}

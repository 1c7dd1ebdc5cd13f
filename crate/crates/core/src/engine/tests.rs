use std::sync::{Arc, Mutex};

use serde_json::{json, Value};

use super::*;
use crate::model::{Actor, Correlation, Timestamp};
use crate::stage::StageKind;

fn pn(s: &str) -> ProcessName {
    ProcessName::new(s).unwrap()
}

fn env(kind: &str, n: i64) -> InputEnvelope {
    InputEnvelope::new(
        "web",
        kind,
        Actor::new("web", "alice"),
        json!({ "n": n }),
        Timestamp::from_unix(n),
    )
}

fn to(id: &str, kind: &str, n: i64) -> InputEnvelope {
    env(kind, n).with_correlation(Correlation {
        agreement_id: Some(id.into()),
        thread_id: None,
    })
}

/// Records committed effects; fails any batch containing a refund.
#[derive(Default)]
struct Recorder(Mutex<Vec<Effect>>);

impl EffectSink for Recorder {
    fn commit(&self, _: &AgreementId, effects: &[Effect]) -> Result<(), EffectRejected> {
        if effects.contains(&Effect::EscrowRefund) {
            return Err(EffectRejected("refunds are closed".into()));
        }
        self.0.lock().unwrap().extend_from_slice(effects);
        Ok(())
    }
}

struct Finisher;

impl ProcessBehavior for Finisher {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        _: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        ctx.emit(Effect::SendDm {
            to: "alice".into(),
            text: "done".into(),
        });
        Ok(Directive::terminate("fulfilled", ctx.payload_terminal()))
    }

    fn on_receive(&self, _: &mut HookContext<'_>, _: &InputEnvelope) -> HookResult<Directive> {
        Err(HookError::rejected("finished"))
    }
}

fn start(ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
    ctx.model_mut()
        .set("data", "last", env.payload["n"].clone());
    match env.kind.as_str() {
        "new" | "set" => Ok(Directive::Wait),
        "go" => Ok(Directive::transition(pn("Mid"), ctx.payload_to(&pn("Mid")))),
        "end" => Ok(Directive::terminate("done", ctx.payload_terminal())),
        "fail" => Err(HookError::Failed("boom".into())),
        "nowhere" => Ok(Directive::transition(pn("Nowhere"), ctx.payload_terminal())),
        "refund" => {
            ctx.emit(Effect::EscrowRefund);
            Ok(Directive::Wait)
        }
        "note" => {
            ctx.emit(Effect::PostStatus {
                text: "noted".into(),
                thread_id: None,
            });
            Ok(Directive::Wait)
        }
        _ => Err(HookError::rejected("unknown kind")),
    }
}

fn mid(ctx: &mut HookContext<'_>, env: &InputEnvelope) -> HookResult<Directive> {
    match env.kind.as_str() {
        "finish" => Ok(Directive::transition(pn("Fin"), ctx.payload_to(&pn("Fin")))),
        _ => Err(HookError::rejected("waiting for finish")),
    }
}

fn web_match(env: &InputEnvelope, _view: &RegistryView<'_>) -> MatchResult {
    match (&env.correlation.agreement_id, env.kind.as_str()) {
        (Some(id), _) => MatchResult::Existing(AgreementId(id.clone())),
        (None, "new" | "end" | "fail" | "go") => MatchResult::New,
        _ => MatchResult::Decline,
    }
}

fn demo_path(name: &str) -> PathDefinition {
    PathDefinition::builder(name)
        .process(
            ProcessDefinition::new(pn("Start"), StageKind::Authoring, ReceiveFn(start))
                .with_contract(StageContract::default().target(pn("Mid")).terminates()),
        )
        .process(
            ProcessDefinition::new(pn("Mid"), StageKind::Execution, ReceiveFn(mid))
                .with_contract(StageContract::default().target(pn("Fin"))),
        )
        .process(
            ProcessDefinition::new(pn("Fin"), StageKind::Enforcement, Finisher)
                .with_contract(StageContract::default().terminates()),
        )
        .init("Start")
        .interface(InterfaceDefinition::new(
            "web",
            |e| e.source == "web",
            web_match,
        ))
        .interface(InterfaceDefinition::accept_all("fallback"))
        .build()
        .unwrap()
}

fn engine_with(sink: Arc<dyn EffectSink>) -> Engine {
    let mut e = Engine::new(sink);
    e.register_path(demo_path("demo")).unwrap();
    e
}

fn engine() -> Engine {
    engine_with(Arc::new(NullSink))
}

#[test]
fn registration_and_routing_table() {
    let mut e = Engine::new(Arc::new(NullSink));
    e.register_path(demo_path("Employment")).unwrap();
    assert_eq!(e.routing_table(), vec!["/Employment".to_string()]);
    assert_eq!(
        e.register_path(demo_path("Employment")).unwrap_err(),
        EngineError::DuplicatePathName("Employment".into())
    );
}

#[test]
fn invalid_definitions() {
    let proc = || ProcessDefinition::new(pn("Start"), StageKind::Authoring, ReceiveFn(start));
    let no_init = PathDefinition::builder("p")
        .process(proc())
        .init("Absent")
        .interface(InterfaceDefinition::accept_all("all"))
        .build();
    assert!(matches!(no_init, Err(EngineError::InvalidDefinition(_))));

    let no_iface = PathDefinition::builder("p")
        .process(proc())
        .init("Start")
        .build();
    assert!(matches!(no_iface, Err(EngineError::InvalidDefinition(_))));

    for bad in ["", "has space", "paths", "_mock", "a/b"] {
        let r = PathDefinition::builder(bad)
            .process(proc())
            .init("Start")
            .interface(InterfaceDefinition::accept_all("all"))
            .build();
        assert!(
            matches!(r, Err(EngineError::InvalidDefinition(_))),
            "{bad:?}"
        );
    }

    let dup = PathDefinition::builder("p")
        .process(proc())
        .process(proc())
        .init("Start")
        .interface(InterfaceDefinition::accept_all("all"))
        .build();
    assert!(matches!(dup, Err(EngineError::InvalidDefinition(_))));
}

#[test]
fn create_then_wait_keeps_history_and_updates_model() {
    let mut e = engine();
    let out = e.dispatch("demo", &env("new", 1)).unwrap();
    assert_eq!(out.disposition, Disposition::Created);
    let id = out.agreement_id.unwrap();
    assert_eq!(id.as_str(), "demo-1");
    assert_eq!(out.active_process.as_ref().unwrap(), "Start");

    let before = e.instance("demo", &id).unwrap().history.len();
    let out = e.dispatch("demo", &to("demo-1", "set", 7)).unwrap();
    assert_eq!(out.disposition, Disposition::Delivered);
    let inst = e.instance("demo", &id).unwrap();
    assert_eq!(inst.history.len(), before);
    assert_eq!(inst.model_get("data", "last"), Some(&json!(7)));
}

#[test]
fn transition_into_immediate_termination_records_both_hops() {
    let sink = Arc::new(Recorder::default());
    let mut e = engine_with(sink.clone());
    e.dispatch("demo", &env("go", 1)).unwrap();
    let id = AgreementId::from("demo-1");
    let inst = e.instance("demo", &id).unwrap();
    assert_eq!(inst.active_process().unwrap(), "Mid");
    let len = inst.history.len();

    let out = e.dispatch("demo", &to("demo-1", "finish", 2)).unwrap();
    assert_eq!(out.outcome.as_deref(), Some("fulfilled"));
    let inst = e.instance("demo", &id).unwrap();
    assert_eq!(inst.history.len(), len + 2);
    let last = &inst.history[inst.history.len() - 1];
    assert_eq!(last.cause, Cause::Activation);
    assert_eq!(last.to_process, None);
    assert!(matches!(inst.history[len].cause, Cause::Envelope { .. }));
    inst.validate_walk_on(e.path("demo").unwrap()).unwrap();
    assert_eq!(sink.0.lock().unwrap().len(), 1);
}

#[test]
fn terminated_instances_ignore_input() {
    let mut e = engine();
    let out = e.dispatch("demo", &env("end", 1)).unwrap();
    assert_eq!(out.disposition, Disposition::Created);
    assert_eq!(out.outcome.as_deref(), Some("done"));
    let snap = e.snapshot();
    let out = e.dispatch("demo", &to("demo-1", "set", 2)).unwrap();
    assert_eq!(out.disposition, Disposition::IgnoredTerminated);
    assert_eq!(e.snapshot(), snap);
}

#[test]
fn operator_terminate() {
    let mut e = engine();
    e.dispatch("demo", &env("new", 1)).unwrap();
    let id = AgreementId::from("demo-1");
    let inst = e
        .terminate("demo", &id, "upheld", Timestamp::from_unix(5))
        .unwrap();
    assert_eq!(inst.outcome(), Some("upheld"));
    assert_eq!(inst.history.last().unwrap().cause, Cause::Exit);
    assert_eq!(
        e.terminate("demo", &id, "upheld", Timestamp::from_unix(6))
            .unwrap_err(),
        EngineError::AlreadyTerminated
    );
}

#[test]
fn rejections_leave_no_trace() {
    let mut e = engine_with(Arc::new(Recorder::default()));
    e.dispatch("demo", &env("new", 1)).unwrap();
    let snap = e.snapshot();

    // Decline from the first accepting interface is final.
    let out = e.dispatch("demo", &env("bogus", 2)).unwrap();
    assert_eq!(out.disposition, Disposition::Rejected);
    // Hook refusal.
    let out = e.dispatch("demo", &to("demo-1", "bogus", 3)).unwrap();
    assert_eq!(out.disposition, Disposition::Rejected);
    assert_eq!(out.reason.as_deref(), Some("unknown kind"));
    // Effect commit refused.
    let out = e.dispatch("demo", &to("demo-1", "refund", 4)).unwrap();
    assert_eq!(out.disposition, Disposition::Rejected);
    assert_eq!(e.snapshot(), snap);
}

#[test]
fn failures_are_errors_without_mutation() {
    let mut e = engine();
    e.dispatch("demo", &env("new", 1)).unwrap();
    let snap = e.snapshot();

    let err = e.dispatch("demo", &to("demo-1", "fail", 2)).unwrap_err();
    assert!(err.is_hook_failure());
    let err = e.dispatch("demo", &to("demo-1", "nowhere", 3)).unwrap_err();
    assert_eq!(err, EngineError::UnknownTargetProcess("Nowhere".into()));
    let err = e.dispatch("demo", &to("demo-404", "set", 4)).unwrap_err();
    assert_eq!(err, EngineError::MatchedMissingInstance("demo-404".into()));
    let err = e.dispatch("nope", &env("new", 5)).unwrap_err();
    assert_eq!(err, EngineError::UnknownPath("nope".into()));
    let mut blank = env("new", 6);
    blank.source = " ".into();
    assert!(matches!(
        e.dispatch("demo", &blank),
        Err(EngineError::InvalidEnvelope(_))
    ));
    assert_eq!(e.snapshot(), snap);

    // A failed creation does not burn an id.
    assert!(e.dispatch("demo", &env("fail", 7)).is_err());
    let out = e.dispatch("demo", &env("new", 8)).unwrap();
    assert_eq!(out.agreement_id.unwrap().as_str(), "demo-2");
}

struct Bounce(&'static str);

impl ProcessBehavior for Bounce {
    fn on_activate(
        &self,
        ctx: &mut HookContext<'_>,
        _: Option<&StagePayload>,
    ) -> HookResult<Directive> {
        Ok(Directive::transition(
            pn(self.0),
            ctx.payload_to(&pn(self.0)),
        ))
    }

    fn on_receive(&self, _: &mut HookContext<'_>, _: &InputEnvelope) -> HookResult<Directive> {
        Ok(Directive::Wait)
    }
}

#[test]
fn activation_loops_are_capped() {
    let path = PathDefinition::builder("loop")
        .process(ProcessDefinition::new(
            pn("Start"),
            StageKind::Authoring,
            ReceiveFn(|ctx: &mut HookContext<'_>, _: &InputEnvelope| {
                Ok(Directive::transition(
                    pn("Ping"),
                    ctx.payload_to(&pn("Ping")),
                ))
            }),
        ))
        .process(ProcessDefinition::new(
            pn("Ping"),
            StageKind::Execution,
            Bounce("Pong"),
        ))
        .process(ProcessDefinition::new(
            pn("Pong"),
            StageKind::Execution,
            Bounce("Ping"),
        ))
        .init("Start")
        .interface(InterfaceDefinition::accept_all("all"))
        .build()
        .unwrap();
    let mut e = Engine::new(Arc::new(NullSink));
    e.register_path(path).unwrap();
    let err = e.dispatch("loop", &env("new", 1)).unwrap_err();
    assert_eq!(
        err,
        EngineError::ActivationLoopExceeded(MAX_ACTIVATION_HOPS)
    );
    assert!(e.snapshot().agreements.is_empty());
}

#[test]
fn isolation_between_paths_and_instances() {
    let mut e = engine();
    e.register_path(demo_path("other")).unwrap();
    e.dispatch("demo", &env("new", 1)).unwrap();
    e.dispatch("demo", &env("new", 2)).unwrap();
    e.dispatch("other", &env("new", 3)).unwrap();
    let other = e.instances("other").unwrap().cloned().collect::<Vec<_>>();
    let second = e.instance("demo", &"demo-2".into()).unwrap().clone();
    e.dispatch("demo", &to("demo-1", "go", 4)).unwrap();
    assert_eq!(
        e.instances("other").unwrap().cloned().collect::<Vec<_>>(),
        other
    );
    assert_eq!(e.instance("demo", &"demo-2".into()).unwrap(), &second);
    assert_eq!(
        e.instance("other", &"other-1".into()).unwrap().id.as_str(),
        "other-1"
    );
}

#[test]
fn preview_is_pure() {
    let mut e = engine();
    e.dispatch("demo", &env("new", 1)).unwrap();
    let snap = e.snapshot();
    let (iface, m) = e.preview("demo", &env("new", 2)).unwrap().unwrap();
    assert_eq!(iface, "web");
    assert_eq!(m, MatchResult::New);
    let mut other = env("new", 3);
    other.source = "social".into();
    assert_eq!(e.preview("demo", &other).unwrap().unwrap().0, "fallback");
    assert_eq!(e.snapshot(), snap);
}

#[test]
fn snapshot_restore_roundtrip_and_orphans() {
    let mut e = engine();
    e.dispatch("demo", &env("go", 1)).unwrap();
    e.dispatch("demo", &env("new", 2)).unwrap();
    let doc = e.snapshot();
    assert_eq!(doc.id_counters.get("demo"), Some(&3));

    let mut fresh = engine();
    fresh.restore(doc.clone()).unwrap();
    assert_eq!(fresh.snapshot(), doc);
    let out = fresh.dispatch("demo", &env("new", 3)).unwrap();
    assert_eq!(out.agreement_id.unwrap().as_str(), "demo-3");

    // Instances of unregistered paths survive until their path appears.
    let mut bare = Engine::new(Arc::new(NullSink));
    bare.restore(doc.clone()).unwrap();
    assert_eq!(bare.snapshot(), doc);
    bare.register_path(demo_path("demo")).unwrap();
    assert_eq!(bare.instances("demo").unwrap().count(), 2);

    assert!(matches!(fresh.restore(doc), Err(EngineError::Restore(_))));
}

#[test]
fn restore_rejects_unknown_active_process() {
    let mut e = engine();
    e.dispatch("demo", &env("go", 1)).unwrap();
    let mut doc = e.snapshot();
    let inst = doc
        .agreements
        .get_mut("demo")
        .unwrap()
        .get_mut("demo-1")
        .unwrap();
    inst.status = InstanceStatus::Active {
        active_process: pn("Gone"),
    };
    let mut fresh = engine();
    assert!(matches!(fresh.restore(doc), Err(EngineError::Restore(_))));
}

#[test]
fn ids_start_at_seed() {
    let mut e = Engine::with_ids(Arc::new(NullSink), IdGenerator::starting_at(40));
    e.register_path(demo_path("demo")).unwrap();
    let out = e.dispatch("demo", &env("new", 1)).unwrap();
    assert_eq!(out.agreement_id.unwrap().as_str(), "demo-40");
}

#[test]
fn outcome_wire_shape_omits_absent_fields() {
    let v: Value = serde_json::to_value(DispatchOutcome::rejected("no")).unwrap();
    assert_eq!(v, json!({ "disposition": "rejected", "reason": "no" }));
    let mut e = engine();
    let out = e.dispatch("demo", &env("new", 1)).unwrap();
    let v = serde_json::to_value(out).unwrap();
    assert_eq!(
        v,
        json!({
            "disposition": "created",
            "agreement_id": "demo-1",
            "status": "active",
            "active_process": "Start",
        })
    );
}

#[test]
fn effects_commit_only_after_success() {
    let sink = Arc::new(Recorder::default());
    let mut e = engine_with(sink.clone());
    e.dispatch("demo", &env("new", 1)).unwrap();
    e.dispatch("demo", &to("demo-1", "note", 2)).unwrap();
    assert_eq!(sink.0.lock().unwrap().len(), 1);
    e.dispatch("demo", &to("demo-1", "fail", 3)).unwrap_err();
    assert_eq!(sink.0.lock().unwrap().len(), 1);
}

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use agreement_engine::adapters::inbound::{post_envelope, PlatformEvent, SocialInbound};
use agreement_engine::adapters::MockHub;
use agreement_engine::engine::{DispatchOutcome, Disposition, IdGenerator};
use agreement_engine::model::{Actor, AgreementId, WireEnvelope};
use agreement_engine::paths::{
    demo_escrow, pledge_payload, reference_path, reference_paths, SCARCE_PATH, TSC_PATH,
};
use agreement_engine::runtime::{Clock, FixedStepClock, SystemClock};
use agreement_engine::server::{self, ServerConfig, ServerHandle};
use agreement_engine::stages::lint_path;
use agreement_engine::store::{self, read_log};
use agreement_engine::{Engine, PathDefinition};
use anyhow::{bail, Context, Result};
use serde_json::json;

use crate::Demo;

/// Prints to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn select_paths(names: &[String]) -> Result<Vec<PathDefinition>> {
    if names.is_empty() {
        return Ok(reference_paths());
    }
    names
        .iter()
        .map(|n| reference_path(n).with_context(|| format!("no path named {n:?}")))
        .collect()
}

fn demo_hub() -> Arc<MockHub> {
    Arc::new(MockHub::with_escrow(demo_escrow()))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

pub fn serve(
    bind: SocketAddr,
    db: PathBuf,
    log: Option<PathBuf>,
    paths: &[String],
    id_seed: u64,
    fixed_clock: bool,
) -> Result<()> {
    let log = log.unwrap_or_else(|| store::default_log_path(&db));
    let clock: Arc<dyn Clock> = if fixed_clock {
        Arc::new(FixedStepClock::default())
    } else {
        Arc::new(SystemClock)
    };
    let config = ServerConfig::new(bind, select_paths(paths)?)
        .store(db)
        .log(log)
        .hub(demo_hub())
        .clock(clock)
        .id_seed(id_seed);
    runtime()?.block_on(async {
        let handle = server::run(config).await?;
        emit(&format!("listening on {}", handle.addr()))?;
        handle.run_until_ctrl_c().await?;
        Ok(())
    })
}

async fn post(
    client: &reqwest::Client,
    base: &str,
    path: &str,
    wire: &WireEnvelope,
) -> Result<DispatchOutcome> {
    let out = post_envelope(client, base, path, wire).await?;
    if out.disposition == Disposition::Rejected {
        bail!(
            "{path} rejected the demo input: {}",
            out.reason.unwrap_or_default()
        );
    }
    Ok(out)
}

fn web(kind: &str, who: &str, payload: serde_json::Value) -> WireEnvelope {
    WireEnvelope {
        source: "web-form".into(),
        kind: kind.into(),
        actor: Actor::new("web", who),
        payload,
        correlation: None,
        received_at: None,
    }
}

async fn seed_scarce(handle: &ServerHandle, partial: bool) -> Result<AgreementId> {
    let client = reqwest::Client::new();
    let base = handle.base_url();
    let n = handle.with_runtime(|rt| {
        rt.engine()
            .instances(SCARCE_PATH)
            .map(|i| i.count())
            .unwrap_or(0)
    }) + 1;
    let topic = format!("commons governance #{n}");
    let mut id = None;
    for (supporter, amount) in [("s1", 200), ("s2", 250), ("s3", 100)] {
        let out = post(
            &client,
            &base,
            SCARCE_PATH,
            &web(
                "pledge",
                supporter,
                pledge_payload("authorA", &topic, amount),
            ),
        )
        .await?;
        id = out.agreement_id;
    }
    if !partial {
        let inbound = SocialInbound::default();
        post(
            &client,
            &base,
            SCARCE_PATH,
            &inbound.normalize(&PlatformEvent::dm("authorA", "accept")),
        )
        .await?;
        let essay = json!({
            "author": "authorA",
            "topic": topic,
            "title": "Tending the commons",
            "body": "Shared resources last when the people who use them write the rules.",
        });
        post(
            &client,
            &base,
            SCARCE_PATH,
            &web("essay_submission", "authorA", essay),
        )
        .await?;
    }
    id.context("no agreement id returned")
}

async fn seed_tsc(handle: &ServerHandle, partial: bool) -> Result<AgreementId> {
    let client = reqwest::Client::new();
    let base = handle.base_url();
    let n = handle.with_runtime(|rt| {
        rt.engine()
            .instances(TSC_PATH)
            .map(|i| i.count())
            .unwrap_or(0)
    }) + 1;
    let thread = format!("demo-{n}");
    let inbound = SocialInbound::default();
    let mut mention = PlatformEvent::status(
        "alice",
        "@agreementengine agreement with @bob: I'll review the draft by Friday",
    );
    mention.thread_id = Some(thread.clone());
    let created = post(&client, &base, TSC_PATH, &inbound.normalize(&mention)).await?;
    let mut steps = vec![("alice", "upheld"), ("bob", "broken")];
    if !partial {
        steps.push(("bob", "upheld"));
    }
    for (who, text) in steps {
        post(
            &client,
            &base,
            TSC_PATH,
            &inbound.normalize(&PlatformEvent::reply(who, text, &thread)),
        )
        .await?;
    }
    created.agreement_id.context("no agreement id returned")
}

pub fn seed(demo: Demo, db: PathBuf, partial: bool, id_seed: u64) -> Result<()> {
    let config = ServerConfig::new(([127, 0, 0, 1], 0).into(), reference_paths())
        .log(store::default_log_path(&db))
        .store(db)
        .hub(demo_hub())
        .clock(Arc::new(FixedStepClock::default()))
        .id_seed(id_seed);
    runtime()?.block_on(async {
        let handle = server::run(config).await?;
        let seeded = match demo {
            Demo::Scarce => seed_scarce(&handle, partial).await,
            Demo::Tsc => seed_tsc(&handle, partial).await,
        };
        handle.shutdown().await?;
        emit(&seeded?.to_string())?;
        Ok(())
    })
}

pub fn inspect(path: &str, id: Option<&str>, db: &Path) -> Result<()> {
    let doc = store::load(db).with_context(|| format!("reading {}", db.display()))?;
    let Some(agreements) = doc.agreements.get(path) else {
        if reference_path(path).is_some() {
            emit("[]")?;
            return Ok(());
        }
        bail!("no path named {path:?}");
    };
    let out = match id {
        Some(id) => serde_json::to_value(
            agreements
                .get(id)
                .with_context(|| format!("no agreement {id} in {path}"))?,
        )?,
        None => serde_json::to_value(agreements.values().map(|i| i.summary()).collect::<Vec<_>>())?,
    };
    emit(&serde_json::to_string_pretty(&out)?)
}

pub fn replay(log: &Path, db_out: &Path, compare: Option<&Path>, id_seed: u64) -> Result<()> {
    let records = read_log(log).with_context(|| format!("reading {}", log.display()))?;
    let mut engine = Engine::with_ids(demo_hub(), IdGenerator::starting_at(id_seed));
    for p in reference_paths() {
        engine.register_path(p)?;
    }
    let doc = store::replay(&mut engine, &records)?;
    store::save(&doc, db_out)?;
    eprintln!(
        "replayed {} events into {}",
        records.len(),
        db_out.display()
    );
    if let Some(expected) = compare {
        let want =
            std::fs::read(expected).with_context(|| format!("reading {}", expected.display()))?;
        if want != doc.to_bytes() {
            bail!("replayed store differs from {}", expected.display());
        }
        eprintln!("identical to {}", expected.display());
    }
    Ok(())
}

pub fn lint(paths: &[String]) -> Result<()> {
    let mut report = serde_json::Map::new();
    for p in select_paths(paths)? {
        report.insert(p.name().to_string(), serde_json::to_value(lint_path(&p))?);
    }
    emit(&serde_json::to_string_pretty(&report)?)
}

//! HTTP front door: one ingestion endpoint per path, read-only inspection
//! endpoints, and the mock adapters' outboxes.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::adapters::MockHub;
use crate::engine::{AgreementInstance, EngineError, InstanceSummary, PathDefinition};
use crate::model::{AgreementId, WireEnvelope};
use crate::runtime::{Clock, Runtime, RuntimeConfig, RuntimeError, SystemClock};
use crate::stage::StageKind;

pub struct ServerConfig {
    pub bind: SocketAddr,
    pub store: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub paths: Vec<PathDefinition>,
    pub hub: Arc<MockHub>,
    pub clock: Arc<dyn Clock>,
    pub id_seed: u64,
}

impl ServerConfig {
    pub fn new(bind: SocketAddr, paths: Vec<PathDefinition>) -> Self {
        Self {
            bind,
            store: None,
            log: None,
            paths,
            hub: Arc::new(MockHub::new()),
            clock: Arc::new(SystemClock),
            id_seed: 1,
        }
    }

    pub fn store(mut self, location: impl Into<PathBuf>) -> Self {
        self.store = Some(location.into());
        self
    }

    pub fn log(mut self, location: impl Into<PathBuf>) -> Self {
        self.log = Some(location.into());
        self
    }

    pub fn hub(mut self, hub: Arc<MockHub>) -> Self {
        self.hub = hub;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn id_seed(mut self, seed: u64) -> Self {
        self.id_seed = seed;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("server task failed: {0}")]
    Serve(String),
}

struct AppState {
    runtime: Mutex<Runtime>,
    hub: Arc<MockHub>,
}

impl AppState {
    fn runtime(&self) -> MutexGuard<'_, Runtime> {
        self.runtime.lock().unwrap_or_else(|e| e.into_inner())
    }
}

type Shared = Arc<AppState>;

/// A running server. Dropping the handle without calling
/// [`ServerHandle::shutdown`] leaves the server running until the runtime
/// stops.
pub struct ServerHandle {
    addr: SocketAddr,
    state: Shared,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn hub(&self) -> &Arc<MockHub> {
        &self.state.hub
    }

    /// Runs `f` against the live runtime.
    pub fn with_runtime<T>(&self, f: impl FnOnce(&Runtime) -> T) -> T {
        f(&self.state.runtime())
    }

    /// Stops accepting requests, lets in-flight ones finish and writes a
    /// final snapshot.
    pub async fn shutdown(mut self) -> Result<(), ServerError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.finish().await
    }

    /// Waits for Ctrl-C, then shuts down.
    pub async fn run_until_ctrl_c(self) -> Result<(), ServerError> {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
        self.shutdown().await
    }

    async fn finish(&mut self) -> Result<(), ServerError> {
        match (&mut self.task).await {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(ServerError::Serve(e.to_string())),
            Err(e) => return Err(ServerError::Serve(e.to_string())),
        }
        self.state.runtime().save().map_err(RuntimeError::from)?;
        Ok(())
    }
}

/// Loads the store, registers the paths and starts listening.
pub async fn run(config: ServerConfig) -> Result<ServerHandle, ServerError> {
    let runtime = Runtime::open(RuntimeConfig {
        store: config.store,
        log: config.log,
        paths: config.paths,
        sink: config.hub.clone(),
        clock: config.clock,
        id_seed: config.id_seed,
    })?;
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServerError::BindFailure {
            addr: config.bind,
            source,
        })?;
    let addr = listener
        .local_addr()
        .map_err(|source| ServerError::BindFailure {
            addr: config.bind,
            source,
        })?;
    let state = Arc::new(AppState {
        runtime: Mutex::new(runtime),
        hub: config.hub,
    });
    let app = router(state.clone());
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    tracing::info!(%addr, "listening");
    Ok(ServerHandle {
        addr,
        state,
        stop: Some(stop),
        task,
    })
}

fn router(state: Shared) -> Router {
    Router::new()
        .route("/paths", get(list_paths))
        .route("/_mock/social/outbox", get(social_outbox))
        .route("/_mock/mail/outbox", get(mail_outbox))
        .route("/_mock/escrow", get(escrow))
        .route("/{path}", post(ingest))
        .route("/{path}/agreements", get(list_agreements))
        .route("/{path}/agreements/{id}", get(show_agreement))
        .with_state(state)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<RuntimeError> for ApiError {
    fn from(e: RuntimeError) -> Self {
        let status = match &e {
            RuntimeError::Engine(
                EngineError::UnknownPath(_) | EngineError::UnknownAgreement(_),
            ) => StatusCode::NOT_FOUND,
            RuntimeError::Engine(EngineError::InvalidEnvelope(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %e, "request failed");
        }
        ApiError(status, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        RuntimeError::from(e).into()
    }
}

#[derive(Serialize)]
struct ProcessInfo {
    name: String,
    stage_kind: StageKind,
}

#[derive(Serialize)]
struct PathInfo {
    name: String,
    init: String,
    processes: Vec<ProcessInfo>,
}

async fn list_paths(State(state): State<Shared>) -> Json<Vec<PathInfo>> {
    let rt = state.runtime();
    let infos = rt
        .engine()
        .paths()
        .map(|p| PathInfo {
            name: p.name().to_string(),
            init: p.init().to_string(),
            processes: p
                .processes()
                .map(|proc| ProcessInfo {
                    name: proc.name.to_string(),
                    stage_kind: proc.stage_kind,
                })
                .collect(),
        })
        .collect();
    Json(infos)
}

async fn ingest(
    State(state): State<Shared>,
    Path(path): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    if state.runtime().engine().path(&path).is_none() {
        return Err(EngineError::UnknownPath(path).into());
    }
    let wire: WireEnvelope = serde_json::from_slice(&body)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("malformed envelope: {e}")))?;
    // Dispatch fsyncs the log and snapshot, so keep it off the async workers.
    let outcome = tokio::task::spawn_blocking(move || state.runtime().dispatch(&path, wire))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(outcome).into_response())
}

async fn list_agreements(
    State(state): State<Shared>,
    Path(path): Path<String>,
) -> Result<Json<Vec<InstanceSummary>>, ApiError> {
    let rt = state.runtime();
    let list = rt
        .engine()
        .instances(&path)?
        .map(AgreementInstance::summary)
        .collect();
    Ok(Json(list))
}

async fn show_agreement(
    State(state): State<Shared>,
    Path((path, id)): Path<(String, String)>,
) -> Result<Json<AgreementInstance>, ApiError> {
    let rt = state.runtime();
    let inst = rt.engine().instance(&path, &AgreementId(id))?;
    Ok(Json(inst.clone()))
}

async fn social_outbox(State(state): State<Shared>) -> impl IntoResponse {
    Json(state.hub.social_outbox())
}

async fn mail_outbox(State(state): State<Shared>) -> impl IntoResponse {
    Json(state.hub.mail_outbox())
}

async fn escrow(State(state): State<Shared>) -> impl IntoResponse {
    Json(state.hub.escrow_view())
}

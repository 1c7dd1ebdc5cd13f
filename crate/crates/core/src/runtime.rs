//! An engine bound to its store, event log and clock: every dispatch is
//! stamped, logged and, when it changed something, snapshotted.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use crate::engine::{
    DispatchOutcome, EffectSink, Engine, EngineError, IdGenerator, PathDefinition,
};
use crate::model::{Timestamp, WireEnvelope};
use crate::store::{self, EventLog, StoreDocument, StoreError};

/// Source of `received_at` for envelopes that arrive without one.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// 2021-01-01T00:00:00Z.
pub const DEMO_EPOCH: i64 = 1_609_459_200;

/// Deterministic clock: each reading advances by a fixed step.
#[derive(Debug)]
pub struct FixedStepClock {
    next: AtomicI64,
    step: i64,
}

impl FixedStepClock {
    pub fn new(start: Timestamp, step_secs: i64) -> Self {
        Self {
            next: AtomicI64::new(start.unix()),
            step: step_secs,
        }
    }
}

impl Default for FixedStepClock {
    fn default() -> Self {
        Self::new(Timestamp::from_unix(DEMO_EPOCH), 1)
    }
}

impl Clock for FixedStepClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_unix(self.next.fetch_add(self.step, Ordering::SeqCst))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl RuntimeError {
    /// True for errors that are the server's fault (HTTP 500).
    pub fn is_internal(&self) -> bool {
        match self {
            Self::Store(_) => true,
            Self::Engine(e) => !matches!(
                e,
                EngineError::UnknownPath(_) | EngineError::InvalidEnvelope(_)
            ),
        }
    }
}

pub struct RuntimeConfig {
    /// Snapshot file; `None` keeps everything in memory.
    pub store: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub paths: Vec<PathDefinition>,
    pub sink: Arc<dyn EffectSink>,
    pub clock: Arc<dyn Clock>,
    /// First counter value for agreement ids.
    pub id_seed: u64,
}

pub struct Runtime {
    engine: Engine,
    store: Option<PathBuf>,
    log: Option<EventLog>,
    clock: Arc<dyn Clock>,
}

impl Runtime {
    /// Registers the paths, then loads the store (a missing file is an empty
    /// registry) and opens the log.
    pub fn open(config: RuntimeConfig) -> Result<Self, RuntimeError> {
        let mut engine = Engine::with_ids(config.sink, IdGenerator::starting_at(config.id_seed));
        for p in config.paths {
            engine.register_path(p)?;
        }
        if let Some(location) = &config.store {
            engine.restore(store::load(location)?)?;
        }
        let log = config.log.map(EventLog::open).transpose()?;
        Ok(Self {
            engine,
            store: config.store,
            log,
            clock: config.clock,
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn store_path(&self) -> Option<&Path> {
        self.store.as_deref()
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.log.as_ref().map(EventLog::path)
    }

    /// Stamps, dispatches, logs and persists one envelope.
    ///
    /// Hook failures are logged as `rejected` (that is how replay sees them)
    /// and then returned as errors.
    pub fn dispatch(
        &mut self,
        path: &str,
        wire: WireEnvelope,
    ) -> Result<DispatchOutcome, RuntimeError> {
        let env = wire.stamp(self.clock.now());
        let result = self.engine.dispatch(path, &env);
        let logged = match &result {
            Ok(outcome) => outcome.clone(),
            Err(e) if e.is_hook_failure() => DispatchOutcome::rejected(e.to_string()),
            Err(_) => return result.map_err(Into::into),
        };
        if let Some(log) = &mut self.log {
            log.append(path, &env, &logged)?;
        }
        let outcome = result?;
        if outcome.disposition.mutates() {
            self.save()?;
        }
        Ok(outcome)
    }

    pub fn snapshot(&self) -> StoreDocument {
        self.engine.snapshot()
    }

    /// Writes the current snapshot, if a store is configured.
    pub fn save(&self) -> Result<(), StoreError> {
        match &self.store {
            Some(location) => store::save(&self.engine.snapshot(), location),
            None => Ok(()),
        }
    }
}

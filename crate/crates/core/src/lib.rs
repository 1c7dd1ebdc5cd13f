//! Runtime engine for net-native agreement systems.
//!
//! An agreement system is a set of *paths*. Each path is a state machine of
//! *processes* reached over HTTP at `/{path}`; its *interfaces* decide whether
//! an inbound envelope starts a new agreement or belongs to an existing one.
//! Processes react to activation, input and exit with a directive (wait,
//! transition, terminate) and buffer side effects that the engine commits to
//! the platform adapters once the step succeeds.

pub mod adapters;
pub mod engine;
pub mod model;
pub mod paths;
pub mod runtime;
pub mod server;
pub mod stage;
pub mod stages;
pub mod store;

pub use engine::{
    AgreementInstance, Directive, DispatchOutcome, Disposition, Effect, Engine, EngineError,
    HookContext, HookError, InstanceStatus, InterfaceDefinition, MatchResult, PathDefinition,
    ProcessBehavior, ProcessDefinition,
};
pub use model::{
    Actor, AgreementId, Correlation, InputEnvelope, PathName, ProcessName, Timestamp, WireEnvelope,
};
pub use stage::{StageKind, StagePayload};

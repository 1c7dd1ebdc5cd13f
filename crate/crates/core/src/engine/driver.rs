use crate::model::{AgreementId, DataModel, InputEnvelope, ProcessName, Timestamp};
use crate::stage::StagePayload;

use super::instance::{AgreementInstance, Cause, InstanceStatus, TransitionRecord};
use super::path::PathDefinition;
use super::process::{
    Directive, Effect, HookContext, HookResult, ProcessBehavior, ProcessDefinition,
};
use super::EngineError;

/// Maximum transitions applied within a single operation before the chain
/// is treated as a loop.
pub const MAX_ACTIVATION_HOPS: usize = 64;

/// Result of a successful operation on one instance. The input instance is
/// never modified; callers swap in `instance` once effects are committed.
#[derive(Debug, Clone)]
pub struct Applied {
    pub instance: AgreementInstance,
    pub effects: Vec<Effect>,
    /// The directive returned by the hook that handled the input.
    pub directive: DirectiveKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveKind {
    Wait,
    Transition,
    Terminate,
}

impl From<&Directive> for DirectiveKind {
    fn from(d: &Directive) -> Self {
        match d {
            Directive::Wait => Self::Wait,
            Directive::Transition { .. } => Self::Transition,
            Directive::Terminate { .. } => Self::Terminate,
        }
    }
}

struct Work {
    inst: AgreementInstance,
    effects: Vec<Effect>,
    hops: usize,
    at: Timestamp,
}

/// Applies hooks and directives to instances of one path.
pub struct Driver<'p> {
    path: &'p PathDefinition,
}

impl<'p> Driver<'p> {
    pub fn new(path: &'p PathDefinition) -> Self {
        Self { path }
    }

    /// New instance sitting in the init process, after init's activation
    /// hook (and any chain it starts) has run.
    pub fn create(
        &self,
        id: AgreementId,
        cause: Cause,
        at: Timestamp,
    ) -> Result<Applied, EngineError> {
        let init = self.path.init().clone();
        let inst = AgreementInstance {
            id,
            path_name: self.path.name().clone(),
            status: InstanceStatus::Active {
                active_process: init.clone(),
            },
            data_model: DataModel::new(),
            history: vec![TransitionRecord {
                seq: 0,
                from_process: None,
                to_process: Some(init.clone()),
                cause,
                payload: None,
                at,
            }],
            created_at: at,
        };
        let mut w = Work {
            inst,
            effects: Vec::new(),
            hops: 0,
            at,
        };
        let proc = self.process(&init)?;
        let d = self.run_hook(&mut w, proc, |b, ctx| b.on_activate(ctx, None))?;
        self.apply(&mut w, d, Cause::Activation)?;
        Ok(w.finish(DirectiveKind::Wait))
    }

    /// Hands `env` to the active process and applies what it returns.
    pub fn deliver(
        &self,
        inst: &AgreementInstance,
        env: &InputEnvelope,
    ) -> Result<Applied, EngineError> {
        let active = inst
            .active_process()
            .cloned()
            .ok_or(EngineError::AlreadyTerminated)?;
        let mut w = Work::new(inst, env.received_at);
        let proc = self.process(&active)?;
        let d = self.run_hook(&mut w, proc, |b, ctx| b.on_receive(ctx, env))?;
        let kind = DirectiveKind::from(&d);
        self.apply(
            &mut w,
            d,
            Cause::Envelope {
                digest: env.digest(),
            },
        )?;
        Ok(w.finish(kind))
    }

    pub fn apply_transition(
        &self,
        inst: &AgreementInstance,
        target: &ProcessName,
        payload: StagePayload,
        cause: Cause,
        at: Timestamp,
    ) -> Result<Applied, EngineError> {
        let mut w = Work::new(inst, at);
        self.transition(&mut w, target, payload, cause)?;
        Ok(w.finish(DirectiveKind::Transition))
    }

    pub fn terminate(
        &self,
        inst: &AgreementInstance,
        outcome: &str,
        payload: StagePayload,
        cause: Cause,
        at: Timestamp,
    ) -> Result<Applied, EngineError> {
        let mut w = Work::new(inst, at);
        self.finish_instance(&mut w, outcome, payload, cause)?;
        Ok(w.finish(DirectiveKind::Terminate))
    }

    fn process(&self, name: &ProcessName) -> Result<&'p ProcessDefinition, EngineError> {
        self.path
            .process(name.as_str())
            .ok_or_else(|| EngineError::UnknownTargetProcess(name.to_string()))
    }

    fn run_hook<T>(
        &self,
        w: &mut Work,
        proc: &ProcessDefinition,
        f: impl FnOnce(&dyn ProcessBehavior, &mut HookContext<'_>) -> HookResult<T>,
    ) -> Result<T, EngineError> {
        let mut ctx = HookContext {
            agreement_id: &w.inst.id,
            path: self.path,
            process: &proc.name,
            model: &mut w.inst.data_model,
            effects: &mut w.effects,
            now: w.at,
        };
        f(proc.behavior.as_ref(), &mut ctx).map_err(|error| EngineError::Hook {
            process: proc.name.to_string(),
            error,
        })
    }

    fn apply(&self, w: &mut Work, d: Directive, cause: Cause) -> Result<(), EngineError> {
        match d {
            Directive::Wait => Ok(()),
            Directive::Transition { target, payload } => {
                self.transition(w, &target, payload, cause)
            }
            Directive::Terminate { outcome, payload } => {
                self.finish_instance(w, &outcome, payload, cause)
            }
        }
    }

    fn transition(
        &self,
        w: &mut Work,
        target: &ProcessName,
        payload: StagePayload,
        cause: Cause,
    ) -> Result<(), EngineError> {
        let from = w
            .inst
            .active_process()
            .cloned()
            .ok_or(EngineError::AlreadyTerminated)?;
        let target = self.path.resolve_target(&from, target);
        let to = self
            .path
            .process(target.as_str())
            .ok_or_else(|| EngineError::UnknownTargetProcess(target.to_string()))?;
        w.hops += 1;
        if w.hops > MAX_ACTIVATION_HOPS {
            return Err(EngineError::ActivationLoopExceeded(MAX_ACTIVATION_HOPS));
        }
        let from_proc = self.process(&from)?;
        self.run_hook(w, from_proc, |b, ctx| b.on_exit(ctx))?;
        w.record(
            Some(from),
            Some(target.clone()),
            cause,
            Some(payload.clone()),
        );
        w.inst.status = InstanceStatus::Active {
            active_process: target,
        };
        let d = self.run_hook(w, to, |b, ctx| b.on_activate(ctx, Some(&payload)))?;
        self.apply(w, d, Cause::Activation)
    }

    fn finish_instance(
        &self,
        w: &mut Work,
        outcome: &str,
        payload: StagePayload,
        cause: Cause,
    ) -> Result<(), EngineError> {
        let from = w
            .inst
            .active_process()
            .cloned()
            .ok_or(EngineError::AlreadyTerminated)?;
        let from_proc = self.process(&from)?;
        self.run_hook(w, from_proc, |b, ctx| b.on_exit(ctx))?;
        w.record(Some(from), None, cause, Some(payload));
        w.inst.status = InstanceStatus::Terminated {
            outcome: outcome.to_string(),
        };
        Ok(())
    }
}

impl Work {
    fn new(inst: &AgreementInstance, at: Timestamp) -> Self {
        Self {
            inst: inst.clone(),
            effects: Vec::new(),
            hops: 0,
            at,
        }
    }

    fn record(
        &mut self,
        from: Option<ProcessName>,
        to: Option<ProcessName>,
        cause: Cause,
        payload: Option<StagePayload>,
    ) {
        let seq = self.inst.history.len() as u64;
        self.inst.history.push(TransitionRecord {
            seq,
            from_process: from,
            to_process: to,
            cause,
            payload,
            at: self.at,
        });
    }

    fn finish(self, directive: DirectiveKind) -> Applied {
        Applied {
            instance: self.inst,
            effects: self.effects,
            directive,
        }
    }
}

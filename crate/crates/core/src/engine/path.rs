use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::model::{AgreementId, InputEnvelope, PathName, ProcessName};

use super::instance::{AgreementInstance, InstanceStatus};
use super::process::ProcessDefinition;
use super::EngineError;

/// Names taken by the server's own routes.
pub const RESERVED_PATH_NAMES: [&str; 2] = ["paths", "_mock"];

/// Routing decision made by an interface's matcher.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult {
    Existing(AgreementId),
    New,
    Decline,
}

/// Read-only view over one path's instances, handed to matchers.
#[derive(Clone, Copy)]
pub struct RegistryView<'a> {
    instances: &'a BTreeMap<AgreementId, AgreementInstance>,
}

impl<'a> RegistryView<'a> {
    pub fn new(instances: &'a BTreeMap<AgreementId, AgreementInstance>) -> Self {
        Self { instances }
    }

    pub fn get(&self, id: &AgreementId) -> Option<&'a AgreementInstance> {
        self.instances.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a AgreementInstance> + 'a {
        self.instances.values()
    }

    pub fn active(&self) -> impl Iterator<Item = &'a AgreementInstance> + 'a {
        self.instances.values().filter(|i| i.is_active())
    }

    /// First instance (by creation time, then id) satisfying `pred`.
    pub fn find(
        &self,
        mut pred: impl FnMut(&AgreementInstance) -> bool,
    ) -> Option<&'a AgreementInstance> {
        self.instances
            .values()
            .filter(|i| pred(i))
            .min_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

type FilterFn = dyn Fn(&InputEnvelope) -> bool + Send + Sync;
type MatchFn = dyn Fn(&InputEnvelope, &RegistryView<'_>) -> MatchResult + Send + Sync;

/// Filter/match pair deciding where an inbound envelope goes.
///
/// The filter sees only the envelope. The matcher may read instances but
/// cannot mutate them.
#[derive(Clone)]
pub struct InterfaceDefinition {
    pub name: String,
    filter: Arc<FilterFn>,
    matcher: Arc<MatchFn>,
}

impl InterfaceDefinition {
    pub fn new<F, M>(name: impl Into<String>, filter: F, matcher: M) -> Self
    where
        F: Fn(&InputEnvelope) -> bool + Send + Sync + 'static,
        M: Fn(&InputEnvelope, &RegistryView<'_>) -> MatchResult + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            filter: Arc::new(filter),
            matcher: Arc::new(matcher),
        }
    }

    /// Accepts everything and always opens a new agreement.
    pub fn accept_all(name: impl Into<String>) -> Self {
        Self::new(name, |_| true, |_, _| MatchResult::New)
    }

    pub fn filter(&self, env: &InputEnvelope) -> bool {
        (self.filter)(env)
    }

    pub fn matches(&self, env: &InputEnvelope, view: &RegistryView<'_>) -> MatchResult {
        (self.matcher)(env, view)
    }
}

impl fmt::Debug for InterfaceDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InterfaceDefinition")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

/// A named agreement system: processes, the init process and the ordered
/// interface list.
#[derive(Clone, Debug)]
pub struct PathDefinition {
    name: PathName,
    processes: BTreeMap<ProcessName, ProcessDefinition>,
    init: ProcessName,
    interfaces: Vec<InterfaceDefinition>,
    redirects: BTreeMap<ProcessName, ProcessName>,
}

impl PathDefinition {
    pub fn builder(name: &str) -> PathBuilder {
        PathBuilder {
            name: name.to_string(),
            processes: Vec::new(),
            init: None,
            interfaces: Vec::new(),
        }
    }

    pub fn name(&self) -> &PathName {
        &self.name
    }

    pub fn init(&self) -> &ProcessName {
        &self.init
    }

    pub fn process(&self, name: &str) -> Option<&ProcessDefinition> {
        self.processes
            .iter()
            .find(|(k, _)| k.as_str() == name)
            .map(|(_, v)| v)
    }

    pub fn processes(&self) -> impl Iterator<Item = &ProcessDefinition> {
        self.processes.values()
    }

    pub fn process_count(&self) -> usize {
        self.processes.len()
    }

    pub fn interfaces(&self) -> &[InterfaceDefinition] {
        &self.interfaces
    }

    /// Where a transition from `from` to `target` actually lands once
    /// interposed processes are taken into account.
    pub fn resolve_target(&self, from: &ProcessName, target: &ProcessName) -> ProcessName {
        match self.redirects.get(target) {
            Some(via) if via != from => via.clone(),
            _ => target.clone(),
        }
    }

    /// Effective control-flow edges, after redirects.
    pub fn edges(&self) -> Vec<(ProcessName, ProcessName)> {
        let mut out = Vec::new();
        for p in self.processes.values() {
            for t in &p.contract.targets {
                out.push((p.name.clone(), self.resolve_target(&p.name, t)));
            }
        }
        out
    }

    /// Splices `proc` in front of `before`: every transition aimed at
    /// `before` from elsewhere lands on `proc` instead. `proc` must declare
    /// `before` as one of its own targets.
    pub fn insert_before(
        mut self,
        before: &str,
        proc: ProcessDefinition,
    ) -> Result<Self, EngineError> {
        let before = self
            .processes
            .keys()
            .find(|k| k.as_str() == before)
            .cloned()
            .ok_or_else(|| EngineError::InvalidDefinition(format!("no process {before:?}")))?;
        if self.processes.contains_key(&proc.name) {
            return Err(EngineError::InvalidDefinition(format!(
                "process {} already exists",
                proc.name
            )));
        }
        if !proc.contract.targets.contains(&before) {
            return Err(EngineError::InvalidDefinition(format!(
                "{} does not lead on to {before}",
                proc.name
            )));
        }
        if self.init == before {
            self.init = proc.name.clone();
        }
        self.redirects.insert(before, proc.name.clone());
        self.processes.insert(proc.name.clone(), proc);
        Ok(self)
    }

    /// Replaces an existing process of the same name.
    pub fn replace_process(mut self, proc: ProcessDefinition) -> Result<Self, EngineError> {
        if !self.processes.contains_key(&proc.name) {
            return Err(EngineError::InvalidDefinition(format!(
                "no process {} to replace",
                proc.name
            )));
        }
        for t in &proc.contract.targets {
            if !self.processes.contains_key(t) {
                return Err(EngineError::InvalidDefinition(format!(
                    "{} targets unknown process {t}",
                    proc.name
                )));
            }
        }
        self.processes.insert(proc.name.clone(), proc);
        Ok(self)
    }

    pub(crate) fn check_status(&self, status: &InstanceStatus) -> bool {
        match status {
            InstanceStatus::Active { active_process } => {
                self.processes.contains_key(active_process)
            }
            InstanceStatus::Terminated { .. } => true,
        }
    }
}

pub struct PathBuilder {
    name: String,
    processes: Vec<ProcessDefinition>,
    init: Option<String>,
    interfaces: Vec<InterfaceDefinition>,
}

impl PathBuilder {
    pub fn process(mut self, p: ProcessDefinition) -> Self {
        self.processes.push(p);
        self
    }

    pub fn init(mut self, name: &str) -> Self {
        self.init = Some(name.to_string());
        self
    }

    pub fn interface(mut self, i: InterfaceDefinition) -> Self {
        self.interfaces.push(i);
        self
    }

    pub fn build(self) -> Result<PathDefinition, EngineError> {
        let invalid = |msg: String| EngineError::InvalidDefinition(msg);
        let name = PathName::new(self.name).map_err(|e| invalid(e.to_string()))?;
        if RESERVED_PATH_NAMES.contains(&name.as_str()) {
            return Err(invalid(format!("path name {name} is reserved")));
        }
        let mut processes = BTreeMap::new();
        for p in self.processes {
            if processes.contains_key(&p.name) {
                return Err(invalid(format!("duplicate process {}", p.name)));
            }
            processes.insert(p.name.clone(), p);
        }
        let init = self.init.ok_or_else(|| invalid("no init process".into()))?;
        let init = processes
            .keys()
            .find(|k| k.as_str() == init)
            .cloned()
            .ok_or_else(|| invalid(format!("init process {init:?} is not in the path")))?;
        if self.interfaces.is_empty() {
            return Err(invalid("a path needs at least one interface".into()));
        }
        for p in processes.values() {
            if let Some(t) = p
                .contract
                .targets
                .iter()
                .find(|t| !processes.contains_key(*t))
            {
                return Err(invalid(format!("{} targets unknown process {t}", p.name)));
            }
        }
        Ok(PathDefinition {
            name,
            processes,
            init,
            interfaces: self.interfaces,
            redirects: BTreeMap::new(),
        })
    }
}

use std::collections::BTreeSet;

use crate::engine::{PathDefinition, ProcessDefinition};
use crate::model::ProcessName;

use super::lint::{ancestors, successors};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransplantError {
    #[error("no upstream process produces payload field {0}")]
    MissingPayloadField(String),
    #[error("transition target {0} does not exist in the destination path")]
    UnknownTarget(String),
}

/// Validates `proc` for use in `into` and returns a copy ready to splice in.
///
/// Upstream processes are those that can reach the slot the process will
/// occupy: its same-named process in `into` if there is one, otherwise the
/// processes it transitions to. A process with neither sees every process
/// reachable from init as upstream. Every field the process consumes must
/// be produced by some upstream process, and every target must exist.
pub fn transplant(
    proc: &ProcessDefinition,
    into: &PathDefinition,
) -> Result<ProcessDefinition, TransplantError> {
    for t in &proc.contract.targets {
        if into.process(t.as_str()).is_none() {
            return Err(TransplantError::UnknownTarget(t.to_string()));
        }
    }

    let slots: Vec<ProcessName> = if into.process(proc.name.as_str()).is_some() {
        vec![proc.name.clone()]
    } else {
        proc.contract.targets.iter().cloned().collect()
    };
    let upstream: BTreeSet<ProcessName> = if slots.is_empty() {
        let mut all = successors(into, into.init());
        all.insert(into.init().clone());
        all
    } else {
        let mut up = BTreeSet::new();
        for s in &slots {
            up.extend(ancestors(into, s));
        }
        up.remove(&proc.name);
        up
    };

    let produced: BTreeSet<&str> = upstream
        .iter()
        .filter_map(|n| into.process(n.as_str()))
        .flat_map(|p| p.contract.produces.iter().map(String::as_str))
        .collect();
    if let Some(missing) = proc
        .contract
        .consumes
        .iter()
        .find(|f| !produced.contains(f.as_str()))
    {
        return Err(TransplantError::MissingPayloadField(missing.clone()));
    }
    Ok(proc.clone())
}

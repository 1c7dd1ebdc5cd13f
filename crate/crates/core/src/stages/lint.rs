use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::engine::PathDefinition;
use crate::model::ProcessName;
use crate::stage::StageKind;

/// Advisory findings about a path's shape. None of them block registration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum LintFinding {
    InitNotAuthoring {
        init: ProcessName,
        stage: StageKind,
    },
    TerminatesOutsideEnforcement {
        process: ProcessName,
        stage: StageKind,
    },
    Unreachable {
        process: ProcessName,
    },
    CycleWithoutExit {
        processes: Vec<ProcessName>,
    },
}

type Graph = BTreeMap<ProcessName, BTreeSet<ProcessName>>;

fn reach(graph: &Graph, from: &ProcessName) -> BTreeSet<ProcessName> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from.clone()];
    while let Some(n) = stack.pop() {
        for next in graph.get(&n).into_iter().flatten() {
            if seen.insert(next.clone()) {
                stack.push(next.clone());
            }
        }
    }
    seen
}

/// Processes reachable from `from` by at least one edge.
pub(crate) fn successors(path: &PathDefinition, from: &ProcessName) -> BTreeSet<ProcessName> {
    reach(&graph_of(path), from)
}

/// Processes from which `to` can be reached by at least one edge.
pub(crate) fn ancestors(path: &PathDefinition, to: &ProcessName) -> BTreeSet<ProcessName> {
    let g = graph_of(path);
    g.keys()
        .filter(|n| reach(&g, n).contains(to))
        .cloned()
        .collect()
}

fn graph_of(path: &PathDefinition) -> Graph {
    let mut g: Graph = path
        .processes()
        .map(|p| (p.name.clone(), BTreeSet::new()))
        .collect();
    for (from, to) in path.edges() {
        g.entry(from).or_default().insert(to);
    }
    g
}

/// Checks a path against the usual six-stage shape: start in Authoring,
/// end in Enforcement, no dead processes, no inescapable loops.
pub fn lint_path(path: &PathDefinition) -> Vec<LintFinding> {
    let mut out = Vec::new();
    let g = graph_of(path);
    let init = path.init();

    if let Some(p) = path.process(init.as_str()) {
        if p.stage_kind != StageKind::Authoring {
            out.push(LintFinding::InitNotAuthoring {
                init: init.clone(),
                stage: p.stage_kind,
            });
        }
    }

    for p in path.processes() {
        if p.contract.may_terminate && p.stage_kind != StageKind::Enforcement {
            out.push(LintFinding::TerminatesOutsideEnforcement {
                process: p.name.clone(),
                stage: p.stage_kind,
            });
        }
    }

    let mut reachable = reach(&g, init);
    reachable.insert(init.clone());
    for p in path.processes() {
        if !reachable.contains(&p.name) {
            out.push(LintFinding::Unreachable {
                process: p.name.clone(),
            });
        }
    }

    let closure: BTreeMap<&ProcessName, BTreeSet<ProcessName>> =
        g.keys().map(|n| (n, reach(&g, n))).collect();
    let terminates = |n: &ProcessName| {
        path.process(n.as_str())
            .is_some_and(|p| p.contract.may_terminate)
    };
    let mut reported: BTreeSet<ProcessName> = BTreeSet::new();
    for (n, from_n) in &closure {
        if !from_n.contains(*n) || reported.contains(*n) {
            continue;
        }
        let component: Vec<ProcessName> = from_n
            .iter()
            .filter(|m| closure[m].contains(*n))
            .cloned()
            .collect();
        reported.extend(component.iter().cloned());
        let escapes = component.iter().any(terminates)
            || component.iter().any(|m| closure[m].iter().any(terminates));
        if !escapes {
            out.push(LintFinding::CycleWithoutExit {
                processes: component,
            });
        }
    }
    out
}

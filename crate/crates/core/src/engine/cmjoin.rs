use std::collections::BTreeSet;
use std::time::Instant;

use super::{generic_join, join_order, match_path, project_branch, EngineError, Instance, Metrics, ResultSet, StructuralPredicate};
use super::Database;
use crate::bound::{compute_bound, BoundMode};
use crate::model::{branch_nodes, root_to_leaf_paths, NodeId, ValidatedQuery};
use crate::par::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// One (label, position) table per pattern node; every axis is a live
    /// predicate inside the join.
    NodesAsTables,
    /// One table per root-to-leaf path, matched up front and reduced to the
    /// positions of branch nodes.
    PathsAsTables,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NodesAsTables => "nodes-as-tables",
            Mode::PathsAsTables => "paths-as-tables",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct CmjoinOptions {
    pub exec: Execution,
    /// Skip the bound comparison and use this mode.
    pub force_mode: Option<Mode>,
    /// In path mode, keep every position column instead of branch positions
    /// only. The answer must not change.
    pub keep_all_positions: bool,
}

/// Worst-case optimal evaluation. Node tables are used when the bound with
/// all positions does not exceed the label-only bound; otherwise path tables
/// reduced to branch positions. The report certifies optimality when the
/// first condition holds, or when the branch-position bound and every
/// single-path bound stay within the label-only bound.
pub fn cmjoin(q: &ValidatedQuery, db: &Database, opts: &CmjoinOptions) -> Result<(ResultSet, Metrics), EngineError> {
    let inst = Instance::new(q, db)?;
    let query = q.query();

    let (mode, certificate) = match opts.force_mode {
        Some(m) => (m, false),
        None => {
            let r3 = compute_bound(q, BoundMode::LabelsOnly).exponent;
            let r1 = compute_bound(q, BoundMode::AllPositions).exponent;
            if r1 <= r3 {
                (Mode::NodesAsTables, true)
            } else {
                let r2 = compute_bound(q, BoundMode::BranchPositions).exponent;
                let paths_ok = query.patterns.iter().flat_map(|p| root_to_leaf_paths(&p.root)).all(|path| {
                    compute_bound(q, BoundMode::SinglePath(path)).exponent <= r3
                });
                (Mode::PathsAsTables, r2 <= r3 && paths_ok)
            }
        }
    };

    let mut metrics = Metrics::new(mode.name());
    metrics.optimality_certificate = certificate;
    let mut clock = Instant::now();
    let mut tables = inst.relations.clone();
    let mut preds = Vec::new();
    match mode {
        Mode::NodesAsTables => {
            for (pi, p) in query.patterns.iter().enumerate() {
                for n in p.root.preorder() {
                    let t = inst.node_table(pi, n);
                    clock = metrics.record(format!("node {} {}", p.name, n.id), t.len(), clock);
                    tables.push(t);
                }
                preds.extend(p.root.edges().into_iter().map(|(parent, child, axis)| StructuralPredicate {
                    parent,
                    child,
                    axis,
                    tree: pi,
                }));
            }
        }
        Mode::PathsAsTables => {
            for (pi, p) in query.patterns.iter().enumerate() {
                let keep: BTreeSet<NodeId> = if opts.keep_all_positions {
                    p.root.preorder().iter().map(|n| n.id).collect()
                } else {
                    branch_nodes(&p.root)
                };
                for path in root_to_leaf_paths(&p.root) {
                    let pt = match_path(inst.trees[pi].tree, &path);
                    clock = metrics.record(format!("path {} {}", p.name, path.leaf()), pt.len(), clock);
                    tables.push(project_branch(&pt, &path, &inst.trees[pi], &keep));
                }
            }
        }
    }

    let order = join_order(&tables, query);
    let joined = generic_join(&tables, &preds, &order, &inst.trees, opts.exec)?;
    clock = metrics.record("join", joined.len(), clock);
    let result = inst.finish(&joined);
    metrics.record("result", result.len(), clock);
    Ok((result, metrics))
}

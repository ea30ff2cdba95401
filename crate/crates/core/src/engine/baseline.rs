//! Reference evaluators. SJ matches the whole tree pattern before touching
//! relations; VJ joins on label values first and checks structure as soon
//! as both positions of an edge are present; the naive evaluator
//! backtracks over atoms and is the correctness oracle.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use super::{match_path, project_branch, Database, EngineError, Instance, Metrics, ResultSet, Table};
use crate::model::{root_to_leaf_paths, Attr, Axis, NodeId, ValidatedQuery, Variable};

/// The next table to join: the first (in query order) that shares an
/// attribute with `acc` or is `linked` to it, else the first.
fn next_table(acc: &Table, rest: &[(String, Table)], linked: impl Fn(&Table) -> bool) -> usize {
    let shares = |t: &Table| t.attrs.iter().any(|a| acc.column(a).is_some());
    rest.iter().position(|(_, t)| shares(t) || linked(t)).unwrap_or(0)
}

pub fn sj(q: &ValidatedQuery, db: &Database) -> Result<(ResultSet, Metrics), EngineError> {
    let inst = Instance::new(q, db)?;
    let query = q.query();
    let mut metrics = Metrics::new("sj");
    let mut clock = Instant::now();

    let mut acc: Option<Table> = None;
    for (pi, p) in query.patterns.iter().enumerate() {
        let all: BTreeSet<NodeId> = p.root.preorder().iter().map(|n| n.id).collect();
        let mut matched: Option<Table> = None;
        for path in root_to_leaf_paths(&p.root) {
            let pt = match_path(inst.trees[pi].tree, &path);
            clock = metrics.record(format!("path {} {}", p.name, path.leaf()), pt.len(), clock);
            let full = project_branch(&pt, &path, &inst.trees[pi], &all);
            matched = Some(match matched {
                None => full,
                Some(m) => {
                    let j = m.natural_join(&full);
                    clock = metrics.record(format!("stitch {} {}", p.name, path.leaf()), j.len(), clock);
                    j
                }
            });
        }
        let matched = matched.expect("a pattern has at least one path");
        acc = Some(match acc {
            None => matched,
            Some(a) => {
                let j = a.natural_join(&matched);
                clock = metrics.record(format!("pattern {}", p.name), j.len(), clock);
                j
            }
        });
    }

    let mut rest: Vec<(String, Table)> =
        query.relations.iter().map(|r| r.name.clone()).zip(inst.relations.iter().cloned()).collect();
    let mut acc = match acc {
        Some(a) => a,
        None => rest.remove(0).1,
    };
    while !rest.is_empty() {
        let (name, t) = rest.remove(next_table(&acc, &rest, |_| false));
        acc = acc.natural_join(&t);
        clock = metrics.record(format!("join {name}"), acc.len(), clock);
    }
    let result = inst.finish(&acc);
    metrics.record("result", result.len(), clock);
    Ok((result, metrics))
}

pub fn vj(q: &ValidatedQuery, db: &Database) -> Result<(ResultSet, Metrics), EngineError> {
    let inst = Instance::new(q, db)?;
    let query = q.query();
    let mut metrics = Metrics::new("vj");
    let mut clock = Instant::now();

    let mut rest: Vec<(String, Table)> =
        query.relations.iter().map(|r| r.name.clone()).zip(inst.relations.iter().cloned()).collect();
    let mut pending = Vec::new();
    for (pi, p) in query.patterns.iter().enumerate() {
        for n in p.root.preorder() {
            let t = inst.node_table(pi, n);
            let name = format!("node {} {}", p.name, n.id);
            clock = metrics.record(name.clone(), t.len(), clock);
            rest.push((name, t));
        }
        pending.extend(p.root.edges().into_iter().map(|(parent, child, axis)| (pi, parent, child, axis)));
    }

    let mut acc = rest.remove(0).1;
    let apply = |acc: Table, pending: &mut Vec<(usize, NodeId, NodeId, Axis)>| {
        let mut acc = acc;
        pending.retain(|&(pi, parent, child, axis)| {
            let (Some(cp), Some(cc)) = (acc.column(&Attr::Pos(parent)), acc.column(&Attr::Pos(child))) else {
                return true;
            };
            let view = &inst.trees[pi];
            acc = acc.filter(|r| view.holds(r[cp], r[cc], axis));
            false
        });
        acc
    };
    acc = apply(acc, &mut pending);
    while !rest.is_empty() {
        let linked = |t: &Table| {
            pending.iter().any(|&(_, p, c, _)| {
                (acc.column(&Attr::Pos(p)).is_some() && t.column(&Attr::Pos(c)).is_some())
                    || (acc.column(&Attr::Pos(c)).is_some() && t.column(&Attr::Pos(p)).is_some())
            })
        };
        let (name, t) = rest.remove(next_table(&acc, &rest, linked));
        acc = apply(acc.natural_join(&t), &mut pending);
        clock = metrics.record(format!("join {name}"), acc.len(), clock);
    }
    let result = inst.finish(&acc);
    metrics.record("result", result.len(), clock);
    Ok((result, metrics))
}

/// Nested loops over relation rows, then over pattern nodes in pre-order.
/// Each pattern node ranges over the children or descendants of its
/// parent's binding; a pattern root ranges over the whole tree.
pub fn naive(q: &ValidatedQuery, db: &Database) -> Result<(ResultSet, Metrics), EngineError> {
    let inst = Instance::new(q, db)?;
    let query = q.query();
    let mut metrics = Metrics::new("naive");
    let clock = Instant::now();

    let vars: Vec<Variable> = query.variables();
    let var_index: HashMap<&Variable, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let rels: Vec<(Vec<usize>, &Table)> = inst
        .relations
        .iter()
        .map(|t| {
            let cols = t
                .attrs
                .iter()
                .map(|a| match a {
                    Attr::Label(v) => var_index[v],
                    _ => unreachable!("relation tables hold labels only"),
                })
                .collect();
            (cols, t)
        })
        .collect();

    struct Slot {
        tree: usize,
        parent: Option<(usize, Axis)>,
        constant: Option<Option<u32>>,
        var: Option<usize>,
    }
    let mut slots = Vec::new();
    for (pi, p) in query.patterns.iter().enumerate() {
        let base = slots.len();
        let nodes = p.root.preorder();
        let local: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, base + i)).collect();
        let mut parent_of: HashMap<NodeId, (usize, Axis)> = HashMap::new();
        for (parent, child, axis) in p.root.edges() {
            parent_of.insert(child, (local[&parent], axis));
        }
        for n in nodes {
            slots.push(Slot {
                tree: pi,
                parent: parent_of.get(&n.id).copied(),
                constant: inst.constant_id(&n.test),
                var: n.test.variable().map(|v| var_index[v]),
            });
        }
    }

    struct Search<'s, 'a> {
        inst: &'s Instance<'a>,
        rels: &'s [(Vec<usize>, &'s Table)],
        slots: &'s [Slot],
        ret: Vec<usize>,
        binding: Vec<Option<u32>>,
        nodes: Vec<u32>,
        assignments: usize,
        out: BTreeSet<Vec<u32>>,
    }

    impl Search<'_, '_> {
        /// Binds `var` to `value` if compatible; returns whether it was
        /// newly bound, or `None` on conflict.
        fn bind(&mut self, var: usize, value: u32) -> Option<bool> {
            match self.binding[var] {
                Some(b) if b == value => Some(false),
                Some(_) => None,
                None => {
                    self.binding[var] = Some(value);
                    Some(true)
                }
            }
        }

        fn relations(&mut self, i: usize) {
            if i == self.rels.len() {
                return self.pattern_nodes(0);
            }
            let (cols, table) = (&self.rels[i].0, self.rels[i].1);
            for row in table.rows() {
                let mut fresh = Vec::new();
                let mut ok = true;
                for (&var, &value) in cols.iter().zip(row) {
                    match self.bind(var, value) {
                        Some(true) => fresh.push(var),
                        Some(false) => {}
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    self.relations(i + 1);
                }
                for v in fresh {
                    self.binding[v] = None;
                }
            }
        }

        fn pattern_nodes(&mut self, j: usize) {
            if j == self.slots.len() {
                self.assignments += 1;
                let row = self.ret.iter().map(|&v| self.binding[v].expect("return variables are bound")).collect();
                self.out.insert(row);
                return;
            }
            let slot = &self.slots[j];
            let view = &self.inst.trees[slot.tree];
            let candidates = match slot.parent {
                None => 0..view.labels.len() as u32,
                Some((p, _)) => {
                    let b = self.nodes[p];
                    b + 1..view.end(b)
                }
            };
            for c in candidates {
                if let Some((p, axis)) = slot.parent {
                    if !view.holds(self.nodes[p], c, axis) {
                        continue;
                    }
                }
                let label = view.labels[c as usize];
                if matches!(slot.constant, Some(k) if k != Some(label)) {
                    continue;
                }
                let fresh = match slot.var {
                    Some(v) => match self.bind(v, label) {
                        Some(f) => f,
                        None => continue,
                    },
                    None => false,
                };
                self.nodes[j] = c;
                self.pattern_nodes(j + 1);
                if fresh {
                    self.binding[slot.var.expect("fresh implies a variable")] = None;
                }
            }
        }
    }

    let mut search = Search {
        inst: &inst,
        rels: &rels,
        slots: &slots,
        ret: query.return_vars.iter().map(|v| var_index[v]).collect(),
        binding: vec![None; vars.len()],
        nodes: vec![0; slots.len()],
        assignments: 0,
        out: BTreeSet::new(),
    };
    search.relations(0);
    let clock = metrics.record("assignments", search.assignments, clock);

    let mut joined = Table::new(query.return_vars.iter().cloned().map(Attr::Label).collect());
    for r in &search.out {
        joined.push(r);
    }
    let result = inst.finish(&joined);
    metrics.record("result", result.len(), clock);
    Ok((result, metrics))
}

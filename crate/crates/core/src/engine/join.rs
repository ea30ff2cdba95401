use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use super::{EngineError, Table, TreeView};
use crate::ingest::{build_trie, global_order, Trie};
use crate::model::{Attr, Axis, NodeId, Query};
use crate::par::{self, Execution};

/// `child` must stand in `axis` relation below `parent` in tree `tree`
/// (an index into the tree views passed to [`generic_join`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuralPredicate {
    pub parent: NodeId,
    pub child: NodeId,
    pub axis: Axis,
    pub tree: usize,
}

/// Attribute order for the join: attribute groups by descending number of
/// tables they occur in, ties by attribute order. A group is a label
/// variable followed by the positions of the pattern nodes carrying it; a
/// node without a variable forms a group of its own.
pub fn join_order(tables: &[Table], q: &Query) -> Vec<Attr> {
    let var_of: HashMap<NodeId, Attr> = q
        .patterns
        .iter()
        .flat_map(|p| p.root.preorder())
        .filter_map(|n| n.test.variable().map(|v| (n.id, Attr::Label(v.clone()))))
        .collect();
    let anchor = |a: &Attr| match a {
        Attr::Pos(n) => var_of.get(n).cloned().unwrap_or_else(|| a.clone()),
        _ => a.clone(),
    };
    let grouped: Vec<Vec<Attr>> = tables.iter().map(|t| t.attrs.iter().map(anchor).collect()).collect();
    let mut members: BTreeMap<Attr, Vec<Attr>> = BTreeMap::new();
    for t in tables {
        for a in &t.attrs {
            let m = members.entry(anchor(a)).or_default();
            if !m.contains(a) {
                m.push(a.clone());
            }
        }
    }
    let mut order = Vec::new();
    for g in global_order(&grouped) {
        let mut m = members.remove(&g).unwrap_or_default();
        // Labels sort before positions, positions by node id.
        m.sort();
        order.extend(m);
    }
    order
}

/// How a position attribute is constrained by positions bound earlier.
#[derive(Clone, Copy, Debug)]
struct Check {
    /// Depth of the other endpoint.
    other: usize,
    tree: usize,
    axis: Axis,
    /// Whether the attribute at this depth is the parent endpoint.
    is_parent: bool,
}

#[derive(Clone, Debug, Default)]
struct Level {
    /// `(trie, trie level)` for every trie holding this attribute.
    parts: Vec<(usize, usize)>,
    /// A check on a bound parent, used to restrict the scan to its
    /// descendant range.
    range: Option<Check>,
    checks: Vec<Check>,
}

struct Plan<'a> {
    tries: Vec<Trie<Attr, u32>>,
    levels: Vec<Level>,
    trees: &'a [TreeView<'a>],
}

/// Keys accepted at one depth, with the matching trie position of every
/// participant stored row-major.
struct Matches {
    keys: Vec<u32>,
    pos: Vec<usize>,
}

impl Plan<'_> {
    fn ok(&self, level: &Level, binding: &[u32], k: u32) -> bool {
        level.checks.iter().all(|c| {
            let (p, ch) = if c.is_parent { (k, binding[c.other]) } else { (binding[c.other], k) };
            self.trees[c.tree].holds(p, ch, c.axis)
        })
    }

    /// Leapfrog intersection of all participating trie ranges at depth `d`.
    fn matches(&self, d: usize, binding: &[u32], ranges: &[Range<usize>]) -> Matches {
        let level = &self.levels[d];
        let mut out = Matches { keys: Vec::new(), pos: Vec::new() };
        let (lo, hi) = match level.range {
            Some(c) => {
                let p = binding[c.other];
                (p + 1, self.trees[c.tree].end(p))
            }
            None => (0, u32::MAX),
        };
        let np = level.parts.len();
        let mut cur: Vec<usize> = level.parts.iter().map(|&(t, l)| self.tries[t].seek(l, ranges[t].clone(), &lo)).collect();
        if np == 0 {
            return out;
        }
        let key = |i: usize, at: usize| *self.tries[level.parts[i].0].key(level.parts[i].1, at);
        let end = |i: usize| ranges[level.parts[i].0].end;
        loop {
            if (0..np).any(|i| cur[i] >= end(i)) {
                return out;
            }
            let max = (0..np).map(|i| key(i, cur[i])).max().expect("at least one participant");
            if max >= hi {
                return out;
            }
            let mut agreed = true;
            for i in 0..np {
                let (t, l) = level.parts[i];
                if key(i, cur[i]) < max {
                    cur[i] = self.tries[t].seek(l, cur[i]..end(i), &max);
                    if cur[i] >= end(i) {
                        return out;
                    }
                    if key(i, cur[i]) != max {
                        agreed = false;
                    }
                }
            }
            if !agreed {
                continue;
            }
            if self.ok(level, binding, max) {
                out.keys.push(max);
                out.pos.extend_from_slice(&cur);
            }
            for c in cur.iter_mut() {
                *c += 1;
            }
        }
    }

    /// Narrows every participant to the children of its matched key.
    fn descend(&self, d: usize, pos: &[usize], ranges: &mut [Range<usize>]) -> Vec<Range<usize>> {
        let level = &self.levels[d];
        let mut saved = Vec::with_capacity(pos.len());
        for (i, &(t, l)) in level.parts.iter().enumerate() {
            saved.push(ranges[t].clone());
            ranges[t] = if l + 1 < self.tries[t].depth() { self.tries[t].children(l, pos[i]) } else { 0..0 };
        }
        saved
    }

    fn restore(&self, d: usize, saved: Vec<Range<usize>>, ranges: &mut [Range<usize>]) {
        for (&(t, _), r) in self.levels[d].parts.iter().zip(saved) {
            ranges[t] = r;
        }
    }

    fn rec(&self, d: usize, binding: &mut Vec<u32>, ranges: &mut [Range<usize>], out: &mut Table) {
        if d == self.levels.len() {
            out.push(binding);
            return;
        }
        let m = self.matches(d, binding, ranges);
        let np = self.levels[d].parts.len();
        for (i, &k) in m.keys.iter().enumerate() {
            let saved = self.descend(d, &m.pos[i * np..(i + 1) * np], ranges);
            binding.push(k);
            self.rec(d + 1, binding, ranges, out);
            binding.pop();
            self.restore(d, saved, ranges);
        }
    }
}

/// Attribute-at-a-time join of `tables` under `order`. At each attribute the
/// tries holding it are intersected by galloping seeks. A structural
/// predicate is checked once both endpoints are bound; when the parent comes
/// first, the child's candidates are limited to the parent's descendant
/// range. The result has one column per attribute of `order`. With parallel
/// execution the candidates of the first attribute are split across
/// threads; the output order does not depend on the split.
pub fn generic_join(
    tables: &[Table],
    preds: &[StructuralPredicate],
    order: &[Attr],
    trees: &[TreeView<'_>],
    exec: Execution,
) -> Result<Table, EngineError> {
    let mut out = Table::new(order.to_vec());
    // Zero-width tables are booleans: one empty one empties the result.
    if tables.iter().any(|t| t.width() == 0 && t.is_empty()) {
        return Ok(out);
    }
    let tables: Vec<&Table> = tables.iter().filter(|t| t.width() > 0).collect();
    let depth_of: HashMap<&Attr, usize> = order.iter().enumerate().map(|(i, a)| (a, i)).collect();

    let mut tries = Vec::with_capacity(tables.len());
    for t in &tables {
        let rows: Vec<Vec<u32>> = t.rows().map(<[u32]>::to_vec).collect();
        tries.push(build_trie(&t.attrs, &rows, order).map_err(|e| EngineError::UnknownAttribute(e.to_string()))?);
    }
    let mut levels: Vec<Level> = vec![Level::default(); order.len()];
    for (ti, trie) in tries.iter().enumerate() {
        for (l, a) in trie.attributes().iter().enumerate() {
            levels[depth_of[a]].parts.push((ti, l));
        }
    }
    if let Some(d) = levels.iter().position(|l| l.parts.is_empty()) {
        return Err(EngineError::UnknownAttribute(format!("{} is in no table", order[d])));
    }
    for p in preds {
        let depth = |n: NodeId| {
            depth_of.get(&Attr::Pos(n)).copied().ok_or_else(|| EngineError::UnknownAttribute(Attr::Pos(n).to_string()))
        };
        let (dp, dc) = (depth(p.parent)?, depth(p.child)?);
        if dp < dc {
            let c = Check { other: dp, tree: p.tree, axis: p.axis, is_parent: false };
            let level = &mut levels[dc];
            if level.range.is_none() {
                level.range = Some(c);
            }
            level.checks.push(c);
        } else {
            levels[dp].checks.push(Check { other: dc, tree: p.tree, axis: p.axis, is_parent: true });
        }
    }

    let plan = Plan { tries, levels, trees };
    if order.is_empty() || plan.tries.iter().any(|t| t.is_empty()) {
        if order.is_empty() {
            out.push(&[]);
        }
        return Ok(out);
    }
    let roots: Vec<Range<usize>> = plan.tries.iter().map(|t| t.root()).collect();
    let top = plan.matches(0, &[], &roots);
    let np = plan.levels[0].parts.len();
    let idx: Vec<usize> = (0..top.keys.len()).collect();
    let parts = par::map(exec, &idx, |&i| {
        let mut ranges = roots.clone();
        let mut part = Table::new(order.to_vec());
        plan.descend(0, &top.pos[i * np..(i + 1) * np], &mut ranges);
        let mut binding = vec![top.keys[i]];
        plan.rec(1, &mut binding, &mut ranges, &mut part);
        part
    });
    for p in parts {
        for r in p.rows() {
            out.push(r);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Catalog;
    use crate::ingest::{dewey_encode, LabeledTree};
    use crate::model::Variable;

    fn l(s: &str) -> Attr {
        Attr::Label(Variable::new(s))
    }

    fn table(attrs: &[Attr], rows: &[[u32; 2]]) -> Table {
        let mut t = Table::new(attrs.to_vec());
        rows.iter().for_each(|r| t.push(r));
        t.normalize();
        t
    }

    #[test]
    fn triangle_matches_nested_loops() {
        let r: Vec<[u32; 2]> = vec![[0, 1], [0, 2], [1, 2], [2, 0], [3, 1]];
        let s: Vec<[u32; 2]> = vec![[1, 2], [2, 0], [2, 3], [0, 1]];
        let t: Vec<[u32; 2]> = vec![[0, 2], [0, 0], [1, 0], [3, 3], [2, 1]];
        let tables = vec![table(&[l("a"), l("b")], &r), table(&[l("b"), l("c")], &s), table(&[l("a"), l("c")], &t)];
        let order = vec![l("a"), l("b"), l("c")];
        let mut expect = Vec::new();
        for x in &r {
            for y in &s {
                for z in &t {
                    if x[1] == y[0] && x[0] == z[0] && y[1] == z[1] {
                        expect.push(vec![x[0], x[1], y[1]]);
                    }
                }
            }
        }
        expect.sort();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let got = generic_join(&tables, &[], &order, &[], exec).unwrap();
            assert_eq!(got.rows().map(<[u32]>::to_vec).collect::<Vec<_>>(), expect);
        }
    }

    #[test]
    fn empty_input_empties_output() {
        let tables = vec![table(&[l("a"), l("b")], &[[1, 2]]), Table::new(vec![l("b"), l("c")])];
        let got = generic_join(&tables, &[], &[l("a"), l("b"), l("c")], &[], Execution::Sequential).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn unknown_attribute() {
        let tables = vec![table(&[l("a"), l("b")], &[[1, 2]])];
        assert!(matches!(
            generic_join(&tables, &[], &[l("a")], &[], Execution::Sequential),
            Err(EngineError::UnknownAttribute(_))
        ));
    }

    #[test]
    fn child_predicate_keeps_direct_children() {
        // [0] -> [0,0] -> [0,0,0]: node 0 is the parent, node 2 a grandchild.
        let t = dewey_encode(&LabeledTree::node("r", vec![LabeledTree::node("b", vec![LabeledTree::leaf("b")])]));
        let c = Catalog::build(t.nodes().iter().map(|n| &n.label));
        let views = vec![TreeView::new(&t, &c)];
        let (pa, pb) = (Attr::Pos(NodeId(0)), Attr::Pos(NodeId(1)));
        let mut ta = Table::new(vec![pa.clone()]);
        ta.push(&[0]);
        let mut tb = Table::new(vec![pb.clone()]);
        tb.push(&[1]);
        tb.push(&[2]);
        let pred = |axis| StructuralPredicate { parent: NodeId(0), child: NodeId(1), axis, tree: 0 };
        for order in [vec![pa.clone(), pb.clone()], vec![pb.clone(), pa.clone()]] {
            let tables = [ta.clone(), tb.clone()];
            let child = generic_join(&tables, &[pred(Axis::Child)], &order, &views, Execution::Sequential).unwrap();
            assert_eq!(child.len(), 1);
            assert_eq!(child.project(std::slice::from_ref(&pb)).row(0), &[1]);
            let desc = generic_join(&tables, &[pred(Axis::Descendant)], &order, &views, Execution::Sequential).unwrap();
            assert_eq!(desc.len(), 2);
        }
    }
}

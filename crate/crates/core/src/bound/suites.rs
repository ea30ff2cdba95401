//! Rewriting tree patterns into canonical suites: descendant axes are
//! eliminated one at a time, either by tightening them to child axes
//! (conversion) or by cutting the pattern in two (split) and recording
//! compensation constraints.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use num_traits::ToPrimitive;

use super::lp::{approx_packing, solve_packing, Approx, Packing, Rational};
use super::{Inequality, Lowering};
use crate::model::{Axis, NodeId, PatternNode};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuiteError {
    #[error("edge into {0} is not a descendant axis")]
    NotDescendant(NodeId),
    #[error("pattern still contains a descendant axis into {0}")]
    NotCanonical(NodeId),
    #[error("no edge into node {0}")]
    NoSuchEdge(NodeId),
}

/// A set of pattern nodes whose labels (and, in position-aware modes,
/// positions) sum to at most one.
pub type NodeSet = BTreeSet<NodeId>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Optimizations {
    /// Skip the split of a descendant axis lying below an edge that was
    /// already converted in the same tree.
    pub opt1: bool,
    /// Skip the split of a leaf descendant axis when it cannot beat the
    /// bound already reached through conversion.
    pub opt2: bool,
}

impl Default for Optimizations {
    fn default() -> Self {
        Optimizations { opt1: true, opt2: true }
    }
}

impl Optimizations {
    pub const NONE: Optimizations = Optimizations { opt1: false, opt2: false };
}

/// Relation inequalities and compensation constraints together with the
/// trees still being rewritten. The suite is canonical once every tree is
/// child-only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Suite {
    pub relations: Vec<Inequality>,
    pub compensations: Vec<NodeSet>,
    pub trees: Vec<PatternNode>,
}

impl Suite {
    pub fn is_canonical(&self) -> bool {
        self.trees.iter().all(|t| !t.has_descendant_axis())
    }

    pub fn describe(&self) -> SuiteDescription {
        SuiteDescription {
            trees: self.trees.iter().map(|t| t.to_string()).collect(),
            compensations: self
                .compensations
                .iter()
                .map(|c| c.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("+"))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct SuiteDescription {
    pub trees: Vec<String>,
    pub compensations: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct SuiteStats {
    pub suites_enumerated: u64,
    pub suites_pruned_opt1: u64,
    pub suites_pruned_opt2: u64,
    /// Suites skipped because a relaxation could not beat the best bound
    /// found so far.
    pub suites_pruned_bound: u64,
}

impl SuiteStats {
    pub fn total(&self) -> u64 {
        self.suites_enumerated
            .saturating_add(self.suites_pruned_opt1)
            .saturating_add(self.suites_pruned_opt2)
            .saturating_add(self.suites_pruned_bound)
    }
}

/// Tightens the descendant axis into `child` to a child axis.
pub fn convert(t: &PatternNode, child: NodeId) -> Result<PatternNode, SuiteError> {
    let mut out = t.clone();
    let node = out.find_mut(child).ok_or(SuiteError::NoSuchEdge(child))?;
    match node.axis {
        Some(Axis::Descendant) => {
            node.axis = Some(Axis::Child);
            Ok(out)
        }
        Some(Axis::Child) => Err(SuiteError::NotDescendant(child)),
        None => Err(SuiteError::NoSuchEdge(child)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub upper: PatternNode,
    pub lower: PatternNode,
    pub compensations: Vec<NodeSet>,
}

/// Removes the descendant axis into `child`. For each root-to-leaf path of
/// the remaining upper tree that avoids the cut parent, the nodes of the
/// root-to-parent path together with that path form one compensation set.
pub fn split(t: &PatternNode, child: NodeId) -> Result<Split, SuiteError> {
    let parent = parent_of(t, child).ok_or(SuiteError::NoSuchEdge(child))?;
    let mut upper = t.clone();
    let p = upper.find_mut(parent).expect("parent exists");
    let idx = p.children.iter().position(|c| c.id == child).expect("child of parent");
    if p.children[idx].axis != Some(Axis::Descendant) {
        return Err(SuiteError::NotDescendant(child));
    }
    let mut lower = p.children.remove(idx);
    lower.axis = None;

    let to_parent = path_to(&upper, parent).expect("parent in upper");
    let compensations = leaf_paths(&upper)
        .into_iter()
        .filter(|path| !path.contains(&parent))
        .map(|path| path.into_iter().chain(to_parent.iter().copied()).collect())
        .collect();
    Ok(Split { upper, lower, compensations })
}

fn parent_of(t: &PatternNode, child: NodeId) -> Option<NodeId> {
    t.preorder()
        .into_iter()
        .find(|n| n.children.iter().any(|c| c.id == child))
        .map(|n| n.id)
}

fn path_to(t: &PatternNode, target: NodeId) -> Option<Vec<NodeId>> {
    if t.id == target {
        return Some(vec![t.id]);
    }
    t.children.iter().find_map(|c| {
        path_to(c, target).map(|mut p| {
            p.insert(0, t.id);
            p
        })
    })
}

/// Root-to-leaf paths as node id lists, crossing any axis.
fn leaf_paths(t: &PatternNode) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    fn walk(n: &PatternNode, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        cur.push(n.id);
        if n.children.is_empty() {
            out.push(cur.clone());
        }
        for c in &n.children {
            walk(c, cur, out);
        }
        cur.pop();
    }
    walk(t, &mut Vec::new(), &mut out);
    out
}

/// Root-to-leaf node sets of a child-only tree.
pub fn pc_paths(t: &PatternNode) -> Result<Vec<NodeSet>, SuiteError> {
    if let Some((_, c, _)) = t.edges().into_iter().find(|e| e.2 == Axis::Descendant) {
        return Err(SuiteError::NotCanonical(c));
    }
    Ok(leaf_paths(t).into_iter().map(|p| p.into_iter().collect()).collect())
}

/// Paths of the child-connected pieces obtained by cutting every
/// descendant axis. Each is contained in some path of every suite the tree
/// can still produce, so they give a valid relaxation.
fn component_paths(t: &PatternNode) -> Vec<NodeSet> {
    let mut out = Vec::new();
    fn walk(n: &PatternNode, cur: &mut Vec<NodeId>, out: &mut Vec<NodeSet>, roots: &mut Vec<PatternNode>) {
        cur.push(n.id);
        let child_kids: Vec<&PatternNode> =
            n.children.iter().filter(|c| c.axis != Some(Axis::Descendant)).collect();
        if child_kids.is_empty() {
            out.push(cur.iter().copied().collect());
        }
        for c in &n.children {
            if c.axis == Some(Axis::Descendant) {
                roots.push(c.clone());
            } else {
                walk(c, cur, out, roots);
            }
        }
        cur.pop();
    }
    let mut roots = vec![t.clone()];
    while let Some(r) = roots.pop() {
        walk(&r, &mut Vec::new(), &mut out, &mut roots);
    }
    out
}

/// The descendant axis closest to the root; ties go to the leftmost in
/// pre-order. Identified by its child node.
pub fn highest_descendant_axis(t: &PatternNode) -> Option<NodeId> {
    let mut level: Vec<&PatternNode> = vec![t];
    while !level.is_empty() {
        for n in &level {
            for c in &n.children {
                if c.axis == Some(Axis::Descendant) {
                    return Some(c.id);
                }
            }
        }
        // Children of the same depth, in pre-order.
        level = level.iter().flat_map(|n| n.children.iter()).collect();
    }
    None
}

fn descendant_axis_count(t: &PatternNode) -> usize {
    t.edges().iter().filter(|e| e.2 == Axis::Descendant).count()
}

fn is_leaf_descendant_axis(t: &PatternNode, child: NodeId) -> bool {
    t.find(child).map(|c| !c.has_descendant_axis()).unwrap_or(false)
}

fn is_root_edge(t: &PatternNode, child: NodeId) -> bool {
    t.id == NodeId::DUMMY && t.children.iter().any(|c| c.id == child)
}

fn max_opt(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if a >= b { a } else { b }),
        (a, b) => a.or(b),
    }
}

fn leaves_below(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        1u64 << k
    }
}

/// A tree still being rewritten, with the lowered paths of its
/// child-connected pieces.
#[derive(Clone)]
struct WorkTree {
    tree: PatternNode,
    /// Lower ends of the edges converted so far in this tree.
    converted: Vec<NodeId>,
    paths: Vec<Vec<u32>>,
}

impl WorkTree {
    /// Whether the edge into `child` lies below an already converted edge.
    fn below_conversion(&self, child: NodeId) -> bool {
        self.converted.iter().any(|&c| self.tree.find(c).is_some_and(|n| n.find(child).is_some()))
    }
}

#[derive(Clone)]
struct State {
    trees: Vec<WorkTree>,
    ci: Vec<NodeSet>,
    ci_sets: Vec<Vec<u32>>,
}

impl State {
    fn remaining_axes(&self) -> usize {
        self.trees.iter().map(|t| descendant_axis_count(&t.tree)).sum()
    }
}

/// The best suite found by a search, with its LP value and optimum.
#[derive(Clone, Debug)]
pub(crate) struct Best {
    pub value: Rational,
    pub suite: Suite,
    pub x: Vec<Rational>,
}

pub(crate) struct Search<'a> {
    lowering: &'a Lowering,
    relations: &'a [Inequality],
    relation_sets: Vec<Vec<u32>>,
    opts: Optimizations,
    /// Keep every canonical suite and skip bound-based pruning.
    collect: bool,
    pub stats: SuiteStats,
    pub best: Option<Best>,
    pub suites: Vec<(Suite, Rational)>,
    cache: HashMap<Packing, (Rational, Vec<Rational>)>,
    approx: HashMap<Packing, Approx>,
}

impl<'a> Search<'a> {
    pub fn new(lowering: &'a Lowering, relations: &'a [Inequality], opts: Optimizations, collect: bool) -> Self {
        Search {
            lowering,
            relations,
            relation_sets: lowering.lower_relations(relations),
            opts,
            collect,
            stats: SuiteStats::default(),
            best: None,
            suites: Vec::new(),
            cache: HashMap::new(),
            approx: HashMap::new(),
        }
    }

    pub fn run(&mut self, root: Option<PatternNode>, ci: Vec<NodeSet>) {
        let trees = root.into_iter().map(|tree| self.work(tree, Vec::new())).collect();
        let ci_sets = ci.iter().map(|c| self.lowering.lower(c)).collect();
        self.explore(State { trees, ci, ci_sets });
    }

    fn work(&self, tree: PatternNode, converted: Vec<NodeId>) -> WorkTree {
        let paths = component_paths(&tree).iter().map(|p| self.lowering.lower(p)).collect();
        WorkTree { tree, converted, paths }
    }

    fn solve(&mut self, structural: &[NodeSet]) -> (Rational, Vec<Rational>) {
        let packing = self.lowering.packing(self.relations, structural);
        if let Some(hit) = self.cache.get(&packing) {
            return hit.clone();
        }
        let out = solve_packing(&packing);
        self.cache.insert(packing, out.clone());
        out
    }

    /// The LP of a state with every undecided descendant axis cut. Any suite
    /// below the state has a superset of its constraints.
    fn relaxation(&mut self, state: &State) -> (Packing, Approx) {
        let mut sets = self.relation_sets.clone();
        sets.extend(state.ci_sets.iter().cloned());
        for t in &state.trees {
            sets.extend(t.paths.iter().cloned());
        }
        let packing = self.lowering.packing_of(sets);
        if let Some(a) = self.approx.get(&packing) {
            return (packing, a.clone());
        }
        let a = approx_packing(&packing);
        self.approx.insert(packing.clone(), a.clone());
        (packing, a)
    }

    /// Whether the relaxation optimum is at most `bound`. The float value
    /// only rules pruning out; pruning itself needs an exact certificate.
    fn relaxation_at_most(&mut self, packing: &Packing, approx: &Approx, bound: &Rational) -> bool {
        let b = bound.to_f64().unwrap_or(f64::INFINITY);
        if approx.value > b + 1e-7 {
            return false;
        }
        if approx.upper(packing) <= *bound {
            return true;
        }
        let exact = match self.cache.get(packing) {
            Some(hit) => hit.0.clone(),
            None => {
                let out = solve_packing(packing);
                let v = out.0.clone();
                self.cache.insert(packing.clone(), out);
                v
            }
        };
        exact <= *bound
    }

    fn incumbent(&self) -> Option<&Rational> {
        self.best.as_ref().map(|b| &b.value)
    }

    /// Picks the tree to branch on.
    ///
    /// Decisions in different trees never interact, so any tree may go
    /// next. Forced moves come first, then a tree where the relaxation
    /// optimum `x` violates both children, since both sides then tighten.
    fn choose(&self, state: &State, x: Option<&[f64]>) -> usize {
        let mut candidates = state.trees.iter().enumerate().filter(|(_, t)| t.tree.has_descendant_axis());
        let first = candidates.clone().next().expect("some tree has a descendant axis").0;
        let Some(x) = x else {
            return first;
        };
        for (i, t) in candidates.by_ref() {
            let axis = highest_descendant_axis(&t.tree).expect("has a descendant axis");
            if is_root_edge(&t.tree, axis) || (self.opts.opt1 && t.below_conversion(axis)) {
                return i;
            }
            let conv_ok = self.lowering.satisfied(&component_paths(&convert(&t.tree, axis).expect("descendant")), x);
            let sp = split(&t.tree, axis).expect("descendant");
            let mut sets = sp.compensations;
            sets.extend(component_paths(&sp.upper));
            sets.extend(component_paths(&sp.lower));
            if !conv_ok && !self.lowering.satisfied(&sets, x) {
                return i;
            }
        }
        first
    }

    /// Returns the best value among suites evaluated below this state.
    fn explore(&mut self, state: State) -> Option<Rational> {
        if !state.trees.iter().any(|t| t.tree.has_descendant_axis()) {
            return Some(self.leaf(state));
        }
        let k = state.remaining_axes();
        let relaxed = (!self.collect).then(|| self.relaxation(&state));
        if let (Some((packing, approx)), Some(inc)) = (&relaxed, self.incumbent().cloned()) {
            if self.relaxation_at_most(packing, approx, &inc) {
                self.stats.suites_pruned_bound = self.stats.suites_pruned_bound.saturating_add(leaves_below(k));
                return None;
            }
        }
        let ti = self.choose(&state, relaxed.as_ref().map(|r| r.1.x.as_slice()));
        let tree = state.trees[ti].tree.clone();
        let axis = highest_descendant_axis(&tree).expect("tree has a descendant axis");

        let split_state = |this: &Self, state: &State| {
            let Split { upper, lower, compensations } = split(&tree, axis).expect("descendant axis");
            let mut next = state.clone();
            next.ci_sets.extend(compensations.iter().map(|c| this.lowering.lower(c)));
            next.ci.extend(compensations);
            next.trees.splice(ti..=ti, [this.work(upper, Vec::new()), this.work(lower, Vec::new())]);
            next
        };

        // Edges out of the merge root: converting one only adds the root,
        // which carries no LP variable, to later paths and compensation sets
        // that are otherwise those of the split. The split side dominates.
        if is_root_edge(&tree, axis) && !self.collect {
            self.stats.suites_pruned_bound = self.stats.suites_pruned_bound.saturating_add(leaves_below(k - 1));
            let next = split_state(self, &state);
            return self.explore(next);
        }

        let mut conv_state = state.clone();
        let mut converted = state.trees[ti].converted.clone();
        converted.push(axis);
        conv_state.trees[ti] = self.work(convert(&tree, axis).expect("descendant axis"), converted);

        if self.opts.opt1 && state.trees[ti].below_conversion(axis) {
            self.stats.suites_pruned_opt1 = self.stats.suites_pruned_opt1.saturating_add(leaves_below(k - 1));
            return self.explore(conv_state);
        }
        let split_state = split_state(self, &state);

        // The child with the larger relaxation goes first: it is the more
        // likely to hold a strong suite, and an early strong incumbent lets
        // the rest of the search be cut off.
        let split_first = !self.collect && {
            let c = self.relaxation(&conv_state).1.value;
            let s = self.relaxation(&split_state).1.value;
            s > c + 1e-9
        };
        if split_first {
            let split_best = self.explore(split_state);
            let conv_best = self.explore(conv_state);
            return max_opt(conv_best, split_best);
        }
        let conv_best = self.explore(conv_state);
        if self.opts.opt2 && is_leaf_descendant_axis(&tree, axis) {
            let reached = max_opt(conv_best.clone(), self.incumbent().cloned());
            if let Some(reached) = reached {
                let (packing, approx) = self.relaxation(&split_state);
                if self.relaxation_at_most(&packing, &approx, &reached) {
                    self.stats.suites_pruned_opt2 = self.stats.suites_pruned_opt2.saturating_add(leaves_below(k - 1));
                    return conv_best;
                }
            }
        }
        let split_best = self.explore(split_state);
        max_opt(conv_best, split_best)
    }

    fn leaf(&mut self, state: State) -> Rational {
        let trees: Vec<PatternNode> = state.trees.into_iter().map(|t| t.tree).collect();
        let mut structural = state.ci.clone();
        for t in &trees {
            structural.extend(pc_paths(t).expect("canonical"));
        }
        let (value, x) = self.solve(&structural);
        self.stats.suites_enumerated += 1;
        let suite = Suite { relations: self.relations.to_vec(), compensations: state.ci, trees };
        if self.collect {
            self.suites.push((suite.clone(), value.clone()));
        }
        let better = self.best.as_ref().is_none_or(|b| value > b.value);
        if better {
            self.best = Some(Best { value: value.clone(), suite, x });
        }
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_query;

    fn pat(src: &str) -> PatternNode {
        let q = parse_query(&format!("TREE T FROM \"t.xml\" MATCH {src}; RETURN x")).unwrap();
        q.patterns[0].root.clone()
    }

    fn set(ids: &[u32]) -> NodeSet {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    #[test]
    fn convert_descendant() {
        let t = pat(":a//:b");
        assert_eq!(convert(&t, NodeId(1)).unwrap(), pat(":a/:b"));
        let t = pat(":a[:b]//:c");
        assert_eq!(convert(&t, NodeId(2)).unwrap(), pat(":a[:b]/:c"));
        assert_eq!(convert(&t, NodeId(1)).unwrap_err(), SuiteError::NotDescendant(NodeId(1)));
    }

    #[test]
    fn split_with_compensation() {
        // a[b]/c//d: a=0 b=1 c=2 d=3
        let t = pat(":a[:b]/:c//:d");
        let s = split(&t, NodeId(3)).unwrap();
        assert_eq!(s.upper, pat(":a[:b]/:c"));
        assert_eq!(s.lower.id, NodeId(3));
        assert_eq!(s.lower.axis, None);
        assert_eq!(s.compensations, vec![set(&[0, 1, 2])]);
    }

    #[test]
    fn split_without_other_leaves() {
        let s = split(&pat(":a//:b"), NodeId(1)).unwrap();
        assert_eq!(s.upper.node_count(), 1);
        assert!(s.compensations.is_empty());
    }

    #[test]
    fn split_two_free_leaves() {
        // a[b][c]/d//e: a=0 b=1 c=2 d=3 e=4
        let s = split(&pat(":a[:b][:c]/:d//:e"), NodeId(4)).unwrap();
        assert_eq!(s.compensations, vec![set(&[0, 1, 3]), set(&[0, 2, 3])]);
    }

    #[test]
    fn split_rejects_child_edge() {
        assert_eq!(split(&pat(":a/:b"), NodeId(1)).unwrap_err(), SuiteError::NotDescendant(NodeId(1)));
    }

    #[test]
    fn pc_paths_need_child_only() {
        assert_eq!(pc_paths(&pat(":a[:b/:c]/:d")).unwrap(), vec![set(&[0, 1, 2]), set(&[0, 3])]);
        assert_eq!(pc_paths(&pat(":a//:b")).unwrap_err(), SuiteError::NotCanonical(NodeId(1)));
    }

    #[test]
    fn highest_axis_prefers_depth_then_left() {
        // a[b//c]//d: depth-1 axis into d wins over depth-2 axis into c.
        assert_eq!(highest_descendant_axis(&pat(":a[:b//:c]//:d")), Some(NodeId(3)));
        assert_eq!(highest_descendant_axis(&pat(":a[//:b]//:c")), Some(NodeId(1)));
        assert_eq!(highest_descendant_axis(&pat(":a/:b")), None);
    }

    #[test]
    fn component_paths_cut_descendants() {
        let paths = component_paths(&pat(":a[:b]/:c//:d/:e"));
        assert!(paths.contains(&set(&[0, 1])));
        assert!(paths.contains(&set(&[0, 2])));
        assert!(paths.contains(&set(&[3, 4])));
        assert_eq!(paths.len(), 3);
    }
}

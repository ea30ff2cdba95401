//! Abstract syntax for cross-model conjunctive queries (CMCQs). A query
//! joins relation atoms with tree patterns over shared label variables and
//! returns a subset of those variables.

mod parse;
mod print;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

pub use parse::{parse_query, ParseError};
pub use validate::{validate, Occurrence, ValidatedQuery, ValidationError};

/// A query variable. Relation columns and pattern nodes that carry the same
/// variable are joined on label value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty());
        Variable(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier of a pattern node, unique across all patterns of a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    /// The synthetic root introduced by [`merge_patterns`].
    pub const DUMMY: NodeId = NodeId(u32::MAX);
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == NodeId::DUMMY {
            f.write_str("n*")
        } else {
            write!(f, "n{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Child,
    Descendant,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LabelTest {
    Constant(String),
    Variable(Variable),
    /// Matches nodes labeled with the constant and binds the variable to it.
    Both(String, Variable),
    /// Matches any node and binds nothing. Only used for the merge root.
    Any,
}

impl LabelTest {
    pub fn variable(&self) -> Option<&Variable> {
        match self {
            LabelTest::Variable(v) | LabelTest::Both(_, v) => Some(v),
            _ => None,
        }
    }

    pub fn constant(&self) -> Option<&str> {
        match self {
            LabelTest::Constant(c) | LabelTest::Both(c, _) => Some(c),
            _ => None,
        }
    }
}

/// Attribute of a join table or LP variable. Labels are either bound to a
/// query variable or hidden on a node without one; positions identify
/// pattern nodes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attr {
    Label(Variable),
    Hidden(NodeId),
    Pos(NodeId),
}

impl Attr {
    pub fn is_position(&self) -> bool {
        matches!(self, Attr::Pos(_))
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attr::Label(v) => write!(f, "{v}"),
            Attr::Hidden(n) => write!(f, "#{n}"),
            Attr::Pos(n) => write!(f, "p({n})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternNode {
    pub id: NodeId,
    pub test: LabelTest,
    /// `None` only for a pattern root.
    pub axis: Option<Axis>,
    pub children: Vec<PatternNode>,
}

impl PatternNode {
    pub fn leaf(id: NodeId, test: LabelTest, axis: Option<Axis>) -> Self {
        PatternNode { id, test, axis, children: Vec::new() }
    }

    /// The attribute that carries this node's label in tables and LPs.
    pub fn label_attr(&self) -> Attr {
        match self.test.variable() {
            Some(v) => Attr::Label(v.clone()),
            None => Attr::Hidden(self.id),
        }
    }

    /// Nodes in pre-order.
    pub fn preorder(&self) -> Vec<&PatternNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn find(&self, id: NodeId) -> Option<&PatternNode> {
        self.preorder().into_iter().find(|n| n.id == id)
    }

    pub fn find_mut(&mut self, id: NodeId) -> Option<&mut PatternNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(PatternNode::node_count).sum::<usize>()
    }

    pub fn has_descendant_axis(&self) -> bool {
        self.children
            .iter()
            .any(|c| c.axis == Some(Axis::Descendant) || c.has_descendant_axis())
    }

    /// Edges `(parent, child, axis)` in pre-order of the child.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, Axis)> {
        let mut out = Vec::new();
        for n in self.preorder() {
            for c in &n.children {
                out.push((n.id, c.id, c.axis.unwrap_or(Axis::Child)));
            }
        }
        out
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        self.preorder()
            .into_iter()
            .filter_map(|n| n.test.variable().cloned())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationAtom {
    pub name: String,
    pub attributes: Vec<Variable>,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreePattern {
    pub name: String,
    pub source: String,
    pub root: PatternNode,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Query {
    pub relations: Vec<RelationAtom>,
    pub patterns: Vec<TreePattern>,
    pub return_vars: Vec<Variable>,
}

impl Query {
    /// All variables of the query, in first-occurrence order (relations, then
    /// patterns in pre-order).
    pub fn variables(&self) -> Vec<Variable> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let rel_vars = self.relations.iter().flat_map(|r| r.attributes.iter());
        let pat_vars = self
            .patterns
            .iter()
            .flat_map(|p| p.root.preorder())
            .filter_map(|n| n.test.variable());
        for v in rel_vars.chain(pat_vars) {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Renumbers pattern nodes `0..` in pre-order across patterns.
    pub fn renumber(&mut self) {
        let mut next = 0u32;
        for p in &mut self.patterns {
            renumber_node(&mut p.root, &mut next);
        }
    }

    /// Which tree pattern owns a node.
    pub fn pattern_of(&self, id: NodeId) -> Option<usize> {
        self.patterns.iter().position(|p| p.root.find(id).is_some())
    }
}

fn renumber_node(n: &mut PatternNode, next: &mut u32) {
    n.id = NodeId(*next);
    *next += 1;
    for c in &mut n.children {
        renumber_node(c, next);
    }
}

/// A root-to-leaf path of a pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternPath {
    pub nodes: Vec<PatternNode>,
    /// `axes[i]` connects `nodes[i]` and `nodes[i + 1]`.
    pub axes: Vec<Axis>,
}

impl PatternPath {
    pub fn leaf(&self) -> NodeId {
        self.nodes.last().expect("paths are non-empty").id
    }

    pub fn ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    /// The path as a standalone chain pattern.
    pub fn to_pattern(&self) -> PatternNode {
        let mut iter = self.nodes.iter().zip(
            std::iter::once(None).chain(self.axes.iter().copied().map(Some)),
        );
        let (first, _) = iter.next().expect("paths are non-empty");
        let mut chain: Vec<PatternNode> = vec![PatternNode::leaf(first.id, first.test.clone(), None)];
        for (n, axis) in iter {
            chain.push(PatternNode::leaf(n.id, n.test.clone(), axis));
        }
        let mut node = chain.pop().expect("non-empty");
        while let Some(mut parent) = chain.pop() {
            parent.children.push(node);
            node = parent;
        }
        node
    }
}

/// Joins several patterns under a fresh root whose label matches anything.
/// Each input root hangs off the new root through a descendant axis.
pub fn merge_patterns(patterns: &[PatternNode]) -> PatternNode {
    assert!(!patterns.is_empty(), "merge_patterns needs at least one pattern");
    if patterns.len() == 1 {
        return patterns[0].clone();
    }
    PatternNode {
        id: NodeId::DUMMY,
        test: LabelTest::Any,
        axis: None,
        children: patterns
            .iter()
            .cloned()
            .map(|mut p| {
                p.axis = Some(Axis::Descendant);
                p
            })
            .collect(),
    }
}

/// One path per leaf, leaves in document order.
pub fn root_to_leaf_paths(p: &PatternNode) -> Vec<PatternPath> {
    fn walk(n: &PatternNode, nodes: &mut Vec<PatternNode>, axes: &mut Vec<Axis>, out: &mut Vec<PatternPath>) {
        let mut shallow = n.clone();
        shallow.children.clear();
        nodes.push(shallow);
        if n.children.is_empty() {
            out.push(PatternPath { nodes: nodes.clone(), axes: axes.clone() });
        }
        for c in &n.children {
            axes.push(c.axis.unwrap_or(Axis::Child));
            walk(c, nodes, axes, out);
            axes.pop();
        }
        nodes.pop();
    }
    let mut out = Vec::new();
    walk(p, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// Nodes with at least two children.
pub fn branch_nodes(p: &PatternNode) -> BTreeSet<NodeId> {
    p.preorder()
        .into_iter()
        .filter(|n| n.children.len() >= 2)
        .map(|n| n.id)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(src: &str) -> PatternNode {
        let q = parse_query(&format!("TREE T FROM \"t.xml\" MATCH {src}; RETURN x")).unwrap();
        q.patterns[0].root.clone()
    }

    #[test]
    fn paths_of_branching_pattern() {
        let p = pat(":a[:b]/:c");
        let paths = root_to_leaf_paths(&p);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].ids(), vec![NodeId(0), NodeId(1)]);
        assert_eq!(paths[1].ids(), vec![NodeId(0), NodeId(2)]);
    }

    #[test]
    fn paths_keep_axes() {
        let p = pat(":a[:b]/:c//:d");
        let paths = root_to_leaf_paths(&p);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[1].ids(), vec![NodeId(0), NodeId(2), NodeId(3)]);
        assert_eq!(paths[1].axes, vec![Axis::Child, Axis::Descendant]);
    }

    #[test]
    fn single_node_has_one_path() {
        let p = pat(":a");
        let paths = root_to_leaf_paths(&p);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].nodes.len(), 1);
        assert!(paths[0].axes.is_empty());
    }

    #[test]
    fn branch_node_sets() {
        assert_eq!(branch_nodes(&pat(":a[:b]/:c")), BTreeSet::from([NodeId(0)]));
        assert!(branch_nodes(&pat(":a/:b/:c")).is_empty());
        assert_eq!(branch_nodes(&pat(":a[:b][:c]/:d")), BTreeSet::from([NodeId(0)]));
    }

    #[test]
    fn merge_identity_and_dummy_root() {
        let p1 = pat(":a/:b");
        assert_eq!(merge_patterns(std::slice::from_ref(&p1)), p1);

        let p2 = pat(":c");
        let p3 = pat(":d//:e");
        for inputs in [vec![p1.clone(), p2.clone()], vec![p1.clone(), p2.clone(), p3.clone()]] {
            let m = merge_patterns(&inputs);
            assert_eq!(m.id, NodeId::DUMMY);
            assert_eq!(m.children.len(), inputs.len());
            assert!(m.children.iter().all(|c| c.axis == Some(Axis::Descendant)));
            let total: usize = inputs.iter().map(PatternNode::node_count).sum();
            assert_eq!(m.node_count(), total + 1);
        }
    }

    #[test]
    fn path_to_pattern_roundtrip() {
        let p = pat(":a//:b/:c");
        let path = &root_to_leaf_paths(&p)[0];
        assert_eq!(path.to_pattern(), p);
    }
}

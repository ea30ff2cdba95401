use std::collections::HashMap;
use std::ops::Range;

use super::{Dewey, LabeledTree, Value};
use crate::model::{Axis, LabelTest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedNode {
    pub label: Value,
    pub pos: Dewey,
    pub parent: Option<usize>,
    /// One past the last pre-order index of this node's subtree.
    pub end: usize,
}

/// A tree in pre-order with Dewey positions. Node `i`'s proper descendants
/// are exactly the indices `i + 1 .. end`.
#[derive(Clone, Debug, Default)]
pub struct EncodedTree {
    nodes: Vec<EncodedNode>,
    by_label: HashMap<Value, Vec<usize>>,
}

impl EncodedTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &EncodedNode {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[EncodedNode] {
        &self.nodes
    }

    /// Pre-order indices of nodes with this label, ascending.
    pub fn with_label(&self, label: &Value) -> &[usize] {
        self.by_label.get(label).map_or(&[], Vec::as_slice)
    }

    /// Positions of nodes with this label, in document order.
    pub fn positions(&self, label: &Value) -> Vec<&Dewey> {
        self.with_label(label).iter().map(|&i| &self.nodes[i].pos).collect()
    }

    pub fn descendants(&self, i: usize) -> Range<usize> {
        i + 1..self.nodes[i].end
    }

    pub fn children(&self, i: usize) -> Children<'_> {
        Children { tree: self, next: i + 1, end: self.nodes[i].end }
    }

    pub fn labels(&self) -> impl Iterator<Item = &Value> {
        self.by_label.keys()
    }

    pub fn depth(&self, i: usize) -> usize {
        self.nodes[i].pos.len()
    }
}

pub struct Children<'a> {
    tree: &'a EncodedTree,
    next: usize,
    end: usize,
}

impl Iterator for Children<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.next >= self.end {
            return None;
        }
        let c = self.next;
        self.next = self.tree.nodes[c].end;
        Some(c)
    }
}

/// Assigns Dewey codes in one pre-order pass.
pub fn dewey_encode(t: &LabeledTree) -> EncodedTree {
    let mut nodes = Vec::with_capacity(t.node_count());
    // Explicit stack: documents can be deeper than the call stack allows.
    enum Step<'a> {
        Enter(&'a LabeledTree, Dewey, Option<usize>),
        Exit(usize),
    }
    let mut stack = vec![Step::Enter(t, Dewey::root(), None)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Enter(n, pos, parent) => {
                let me = nodes.len();
                nodes.push(EncodedNode { label: n.label.clone(), pos: pos.clone(), parent, end: 0 });
                stack.push(Step::Exit(me));
                for (k, c) in n.children.iter().enumerate().rev() {
                    stack.push(Step::Enter(c, pos.child(k as u32), Some(me)));
                }
            }
            Step::Exit(me) => nodes[me].end = nodes.len(),
        }
    }
    let mut by_label: HashMap<Value, Vec<usize>> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        by_label.entry(n.label.clone()).or_default().push(i);
    }
    EncodedTree { nodes, by_label }
}

/// Child: `q` extends `p` by exactly one component. Descendant: `p` is a
/// proper prefix of `q`.
pub fn axis_test(p: &Dewey, q: &Dewey, axis: Axis) -> bool {
    let proper = q.len() > p.len() && p.is_prefix_of(q);
    match axis {
        Axis::Child => proper && q.len() == p.len() + 1,
        Axis::Descendant => proper,
    }
}

/// The (label, position) pairs a pattern node can bind to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeTable {
    pub rows: Vec<(Value, Dewey)>,
}

impl NodeTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn node_table(t: &EncodedTree, test: &LabelTest) -> NodeTable {
    let idx: Vec<usize> = match test.constant() {
        Some(c) => t.with_label(&Value::from(c)).to_vec(),
        None => (0..t.len()).collect(),
    };
    let mut rows: Vec<(Value, Dewey)> =
        idx.into_iter().map(|i| (t.nodes[i].label.clone(), t.nodes[i].pos.clone())).collect();
    rows.sort();
    NodeTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variable;

    fn d(c: &[u32]) -> Dewey {
        Dewey(c.to_vec())
    }

    fn sample() -> LabeledTree {
        LabeledTree::node(
            "a",
            vec![
                LabeledTree::node("b", vec![LabeledTree::leaf("c"), LabeledTree::leaf("b")]),
                LabeledTree::leaf("c"),
            ],
        )
    }

    #[test]
    fn codes_follow_sibling_index() {
        let t = dewey_encode(&sample());
        let codes: Vec<&Dewey> = t.nodes().iter().map(|n| &n.pos).collect();
        assert_eq!(codes, vec![&d(&[0]), &d(&[0, 0]), &d(&[0, 0, 0]), &d(&[0, 0, 1]), &d(&[0, 1])]);
        assert_eq!(t.children(0).collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(t.descendants(1), 2..4);
        assert_eq!(t.with_label(&"b".into()), &[1, 3]);
    }

    #[test]
    fn single_node_and_chain() {
        assert_eq!(dewey_encode(&LabeledTree::leaf("x")).node(0).pos, Dewey::root());
        let mut chain = LabeledTree::leaf("z");
        for _ in 0..5 {
            chain = LabeledTree::node("z", vec![chain]);
        }
        let t = dewey_encode(&chain);
        for i in 1..t.len() {
            assert_eq!(t.node(i).pos.len(), i + 1);
            assert!(t.node(i - 1).pos.is_prefix_of(&t.node(i).pos));
        }
    }

    #[test]
    fn axes() {
        assert!(axis_test(&d(&[0]), &d(&[0, 2]), Axis::Child));
        assert!(!axis_test(&d(&[0]), &d(&[0, 1, 3]), Axis::Child));
        assert!(axis_test(&d(&[0]), &d(&[0, 1, 3]), Axis::Descendant));
        assert!(!axis_test(&d(&[0, 1]), &d(&[0, 2]), Axis::Descendant));
        assert!(!axis_test(&d(&[0]), &d(&[0]), Axis::Descendant));
    }

    #[test]
    fn node_tables() {
        let t = dewey_encode(&sample());
        assert_eq!(node_table(&t, &LabelTest::Variable(Variable::new("x"))).len(), 5);
        assert_eq!(node_table(&t, &LabelTest::Constant("c".into())).len(), 2);
        assert_eq!(node_table(&t, &LabelTest::Both("b".into(), Variable::new("x"))).len(), 2);
        assert!(node_table(&t, &LabelTest::Constant("zzz".into())).is_empty());
    }
}

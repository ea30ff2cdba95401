use std::collections::BTreeSet;

use super::{Table, TreeView};
use crate::ingest::{EncodedTree, Value};
use crate::model::{Attr, Axis, LabelTest, NodeId, PatternPath};

/// All embeddings of one pattern path. Column `i` of `rows` holds the
/// pre-order index of the tree node bound to `nodes[i]`; labels and Dewey
/// positions are read back from the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathTable {
    pub nodes: Vec<NodeId>,
    pub rows: Table,
}

impl PathTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Nodes of `t` that pass a label test, ascending. `None` means every node.
fn with_constant<'t>(t: &'t EncodedTree, test: &LabelTest) -> Option<&'t [usize]> {
    test.constant().map(|c| t.with_label(&Value::from(c)))
}

/// Matches a path top-down. The root may bind to any node passing its label
/// test. Each further node is looked up among the children of its parent's
/// binding, or in the parent's descendant range, using the label index when
/// the node has a constant label.
pub fn match_path(t: &EncodedTree, p: &PatternPath) -> PathTable {
    let k = p.nodes.len();
    // Earlier path index carrying the same variable, if any.
    let same_as: Vec<Option<usize>> = (0..k)
        .map(|j| {
            let v = p.nodes[j].test.variable()?;
            (0..j).find(|&i| p.nodes[i].test.variable() == Some(v))
        })
        .collect();

    let mut partial: Vec<Vec<u32>> = match with_constant(t, &p.nodes[0].test) {
        Some(ids) => ids.iter().map(|&i| vec![i as u32]).collect(),
        None => (0..t.len()).map(|i| vec![i as u32]).collect(),
    };
    for j in 1..k {
        let test = &p.nodes[j].test;
        let index = with_constant(t, test);
        let mut next = Vec::new();
        for row in &partial {
            let parent = row[j - 1] as usize;
            let mut extend = |c: usize| {
                if let Some(i) = same_as[j] {
                    if t.node(row[i] as usize).label != t.node(c).label {
                        return;
                    }
                }
                let mut r = Vec::with_capacity(j + 1);
                r.extend_from_slice(row);
                r.push(c as u32);
                next.push(r);
            };
            match (p.axes[j - 1], index) {
                (Axis::Child, Some(ids)) => {
                    t.children(parent).filter(|c| ids.binary_search(c).is_ok()).for_each(&mut extend)
                }
                (Axis::Child, None) => t.children(parent).for_each(&mut extend),
                (Axis::Descendant, Some(ids)) => {
                    let range = t.descendants(parent);
                    let lo = ids.partition_point(|&i| i < range.start);
                    let hi = ids.partition_point(|&i| i < range.end);
                    ids[lo..hi].iter().copied().for_each(&mut extend)
                }
                (Axis::Descendant, None) => t.descendants(parent).for_each(&mut extend),
            }
        }
        partial = next;
    }

    let mut rows = Table::new(p.nodes.iter().map(|n| Attr::Pos(n.id)).collect());
    for r in &partial {
        rows.push(r);
    }
    rows.normalize();
    PathTable { nodes: p.ids(), rows }
}

/// Converts a path table to label and position columns. Every node with a
/// variable keeps its label column (once per variable); only nodes in
/// `branches` keep their position. Rows are deduplicated. Nodes without a
/// variable carry a constant label and need no column.
pub fn project_branch(pt: &PathTable, p: &PatternPath, view: &TreeView<'_>, branches: &BTreeSet<NodeId>) -> Table {
    let mut attrs = Vec::new();
    // (path column, emit label?) per output column.
    let mut cols: Vec<(usize, bool)> = Vec::new();
    for (j, n) in p.nodes.iter().enumerate() {
        if let Some(v) = n.test.variable() {
            let a = Attr::Label(v.clone());
            if !attrs.contains(&a) {
                attrs.push(a);
                cols.push((j, true));
            }
        }
        if branches.contains(&n.id) {
            attrs.push(Attr::Pos(n.id));
            cols.push((j, false));
        }
    }
    let mut out = Table::new(attrs);
    let mut buf = Vec::with_capacity(cols.len());
    for r in pt.rows.rows() {
        buf.clear();
        buf.extend(cols.iter().map(|&(j, label)| if label { view.labels[r[j] as usize] } else { r[j] }));
        out.push(&buf);
    }
    out.normalize();
    out
}

//! Loading CSV tables and XML or JSON documents, encoding trees with Dewey
//! positions, and building the trie indexes the join runs on.

mod encode;
mod load;
mod trie;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub use encode::{axis_test, dewey_encode, node_table, EncodedNode, EncodedTree, NodeTable};
pub use load::{
    load_relation_csv, load_tree_json, load_tree_xml, parse_relation_csv, parse_tree_json, parse_tree_xml,
    write_relation_csv, write_tree_xml,
};
pub use trie::{build_trie, global_order, Trie};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row} has {got} fields, header has {expected}")]
    RaggedRow { path: PathBuf, row: usize, expected: usize, got: usize },
    #[error("{0}: empty header")]
    EmptyHeader(PathBuf),
    #[error("{path}: malformed document: {msg}")]
    MalformedDocument { path: PathBuf, msg: String },
    #[error("attribute `{0}` is not in the global order")]
    UnknownAttribute(String),
}

/// A label or field value. Equality and order are bytewise on the
/// canonical text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(transparent)]
pub struct Value(String);

impl Value {
    pub fn new(text: impl Into<String>) -> Self {
        Value(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value(s.to_owned())
    }
}

/// A Dewey code. The derived order is component-lexicographic, which puts
/// every node after its ancestors and before its following siblings, so it
/// coincides with document order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dewey(pub Vec<u32>);

impl Dewey {
    pub fn root() -> Self {
        Dewey(vec![0])
    }

    pub fn child(&self, index: u32) -> Self {
        let mut c = self.0.clone();
        c.push(index);
        Dewey(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Dewey) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Dewey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

/// An ordered, labeled tree as read from a document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledTree {
    pub label: Value,
    pub children: Vec<LabeledTree>,
}

impl LabeledTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        LabeledTree { label: Value::new(label), children: Vec::new() }
    }

    pub fn node(label: impl Into<String>, children: Vec<LabeledTree>) -> Self {
        LabeledTree { label: Value::new(label), children }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(LabeledTree::node_count).sum::<usize>()
    }
}

/// A named table of value tuples with set semantics. Rows are kept sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub attributes: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    /// Builds a relation, sorting and deduplicating the rows.
    pub fn new(name: impl Into<String>, attributes: Vec<String>, mut rows: Vec<Vec<Value>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == attributes.len()));
        rows.sort();
        rows.dedup();
        Relation { name: name.into(), attributes, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

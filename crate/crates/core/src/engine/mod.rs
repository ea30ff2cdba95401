//! Query evaluation over relations and encoded trees.
//!
//! Every algorithm works in an interned id space: label values become `u32`
//! ids whose order matches the bytewise order of the values, and node
//! positions become pre-order indices, so the descendants of node `i` are the
//! contiguous range `i + 1 .. end(i)`.

mod baseline;
mod cmjoin;
mod join;
mod paths;
mod table;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use baseline::{naive, sj, vj};
pub use cmjoin::{cmjoin, CmjoinOptions, Mode};
pub use join::{generic_join, join_order, StructuralPredicate};
pub use paths::{match_path, project_branch, PathTable};
pub use table::Table;

use crate::ingest::{
    dewey_encode, load_relation_csv, load_tree_json, load_tree_xml, EncodedTree, IngestError, Relation, Value,
};
use crate::model::{Attr, Axis, LabelTest, PatternNode, Query, ValidatedQuery, Variable};
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("unsupported data source `{0}`: expected a .csv, .xml or .json file")]
    UnsupportedSource(String),
    #[error("no data loaded for source `{0}`")]
    MissingSource(String),
    #[error("atom `{atom}` uses {expected} columns but `{source_name}` has {got}")]
    Arity { atom: String, source_name: String, expected: usize, got: usize },
    #[error("attribute `{0}` is not in the join order")]
    UnknownAttribute(String),
}

/// The relations and trees a query reads, keyed by their source string.
#[derive(Clone, Debug, Default)]
pub struct Database {
    relations: HashMap<String, Relation>,
    trees: HashMap<String, EncodedTree>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_relation(&mut self, source: impl Into<String>, r: Relation) {
        self.relations.insert(source.into(), r);
    }

    pub fn insert_tree(&mut self, source: impl Into<String>, t: EncodedTree) {
        self.trees.insert(source.into(), t);
    }

    pub fn relation(&self, source: &str) -> Option<&Relation> {
        self.relations.get(source)
    }

    pub fn tree(&self, source: &str) -> Option<&EncodedTree> {
        self.trees.get(source)
    }

    /// Loads every source of `q`, resolving paths against `base`. CSV files
    /// hold relations; XML and JSON files hold trees.
    pub fn load(q: &Query, base: &Path) -> Result<Self, EngineError> {
        let mut db = Database::new();
        for r in &q.relations {
            if db.relations.contains_key(&r.source) {
                continue;
            }
            let path = base.join(&r.source);
            match extension(&r.source).as_deref() {
                Some("csv") => db.insert_relation(r.source.clone(), load_relation_csv(&path)?),
                _ => return Err(EngineError::UnsupportedSource(r.source.clone())),
            }
        }
        for p in &q.patterns {
            if db.trees.contains_key(&p.source) {
                continue;
            }
            let path = base.join(&p.source);
            let tree = match extension(&p.source).as_deref() {
                Some("xml") => load_tree_xml(&path)?,
                Some("json") => load_tree_json(&path)?,
                _ => return Err(EngineError::UnsupportedSource(p.source.clone())),
            };
            db.insert_tree(p.source.clone(), dewey_encode(&tree));
        }
        Ok(db)
    }
}

fn extension(source: &str) -> Option<String> {
    Path::new(source).extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

/// Dense ids for every value of an instance, assigned in ascending value
/// order so that id order is value order.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    values: Vec<Value>,
    index: HashMap<Value, u32>,
}

impl Catalog {
    pub fn build<'a>(values: impl IntoIterator<Item = &'a Value>) -> Self {
        let set: BTreeSet<&Value> = values.into_iter().collect();
        let values: Vec<Value> = set.into_iter().cloned().collect();
        let index = values.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        Catalog { values, index }
    }

    pub fn id(&self, v: &Value) -> Option<u32> {
        self.index.get(v).copied()
    }

    pub fn value(&self, id: u32) -> &Value {
        &self.values[id as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An encoded tree with its labels translated to catalog ids.
#[derive(Clone, Debug)]
pub struct TreeView<'a> {
    pub tree: &'a EncodedTree,
    pub labels: Vec<u32>,
}

impl<'a> TreeView<'a> {
    pub fn new(tree: &'a EncodedTree, catalog: &Catalog) -> Self {
        let labels = tree
            .nodes()
            .iter()
            .map(|n| catalog.id(&n.label).expect("catalog covers tree labels"))
            .collect();
        TreeView { tree, labels }
    }

    pub fn end(&self, i: u32) -> u32 {
        self.tree.node(i as usize).end as u32
    }

    /// Whether node `c` stands in `axis` relation below node `p`.
    pub fn holds(&self, p: u32, c: u32, axis: Axis) -> bool {
        c > p
            && c < self.end(p)
            && match axis {
                Axis::Descendant => true,
                Axis::Child => self.tree.node(c as usize).parent == Some(p as usize),
            }
    }
}

/// A query together with its data, translated to id space.
pub(crate) struct Instance<'a> {
    pub q: &'a Query,
    pub catalog: Catalog,
    /// One table per relation atom, over the atom's distinct variables.
    pub relations: Vec<Table>,
    /// One view per tree pattern.
    pub trees: Vec<TreeView<'a>>,
}

impl<'a> Instance<'a> {
    pub fn new(vq: &'a ValidatedQuery, db: &'a Database) -> Result<Self, EngineError> {
        let q = vq.query();
        let mut rels = Vec::with_capacity(q.relations.len());
        for atom in &q.relations {
            let r = db.relation(&atom.source).ok_or_else(|| EngineError::MissingSource(atom.source.clone()))?;
            if r.attributes.len() != atom.attributes.len() {
                return Err(EngineError::Arity {
                    atom: atom.name.clone(),
                    source_name: atom.source.clone(),
                    expected: atom.attributes.len(),
                    got: r.attributes.len(),
                });
            }
            rels.push(r);
        }
        let mut trees = Vec::with_capacity(q.patterns.len());
        for p in &q.patterns {
            trees.push(db.tree(&p.source).ok_or_else(|| EngineError::MissingSource(p.source.clone()))?);
        }

        let constants: Vec<Value> = q
            .patterns
            .iter()
            .flat_map(|p| p.root.preorder())
            .filter_map(|n| n.test.constant().map(Value::from))
            .collect();
        let catalog = Catalog::build(
            rels.iter()
                .flat_map(|r| r.rows.iter().flatten())
                .chain(trees.iter().flat_map(|t| t.nodes().iter().map(|n| &n.label)))
                .chain(constants.iter()),
        );

        let relations = q
            .relations
            .iter()
            .zip(&rels)
            .map(|(atom, r)| relation_table(&atom.attributes, r, &catalog))
            .collect();
        let trees = trees.into_iter().map(|t| TreeView::new(t, &catalog)).collect();
        Ok(Instance { q, catalog, relations, trees })
    }

    pub fn constant_id(&self, test: &LabelTest) -> Option<Option<u32>> {
        test.constant().map(|c| self.catalog.id(&Value::from(c)))
    }

    /// The (label, position) table of one pattern node. Nodes without a
    /// variable contribute only their position.
    pub fn node_table(&self, pattern: usize, n: &PatternNode) -> Table {
        let view = &self.trees[pattern];
        let mut attrs = Vec::with_capacity(2);
        let var = n.test.variable().cloned();
        if let Some(v) = &var {
            attrs.push(Attr::Label(v.clone()));
        }
        attrs.push(Attr::Pos(n.id));
        let mut t = Table::new(attrs);
        let wanted = self.constant_id(&n.test);
        for (i, &l) in view.labels.iter().enumerate() {
            if let Some(c) = wanted {
                if c != Some(l) {
                    continue;
                }
            }
            if var.is_some() {
                t.push(&[l, i as u32]);
            } else {
                t.push(&[i as u32]);
            }
        }
        t
    }

    /// Projects a join result onto the return variables.
    pub fn finish(&self, joined: &Table) -> ResultSet {
        let attrs: Vec<Attr> = self.q.return_vars.iter().cloned().map(Attr::Label).collect();
        let projected = joined.project(&attrs);
        ResultSet {
            schema: self.q.return_vars.clone(),
            rows: projected
                .rows()
                .map(|r| r.iter().map(|&id| self.catalog.value(id).clone()).collect())
                .collect(),
        }
    }
}

/// Builds the table of one relation atom. A variable repeated across
/// columns keeps only rows whose columns agree.
fn relation_table(vars: &[Variable], r: &Relation, catalog: &Catalog) -> Table {
    let mut distinct: Vec<&Variable> = Vec::new();
    for v in vars {
        if !distinct.contains(&v) {
            distinct.push(v);
        }
    }
    let first: Vec<usize> = distinct.iter().map(|d| vars.iter().position(|v| v == *d).unwrap()).collect();
    let mut t = Table::new(distinct.iter().map(|v| Attr::Label((*v).clone())).collect());
    let mut buf = Vec::with_capacity(distinct.len());
    'rows: for row in &r.rows {
        for (c, v) in vars.iter().enumerate() {
            let f = vars.iter().position(|w| w == v).unwrap();
            if row[c] != row[f] {
                continue 'rows;
            }
        }
        buf.clear();
        buf.extend(first.iter().map(|&c| catalog.id(&row[c]).expect("catalog covers relation values")));
        t.push(&buf);
    }
    t.normalize();
    t
}

/// One evaluation stage and the number of tuples it materialized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub name: String,
    pub rows: u64,
    pub ms: f64,
}

/// Cardinalities of every materialized intermediate and of the final
/// result, with timings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub steps: Vec<Step>,
    pub total_intermediate: u64,
    pub total_ms: f64,
    pub mode: String,
    pub optimality_certificate: bool,
}

impl Metrics {
    pub fn new(mode: impl Into<String>) -> Self {
        Metrics { steps: Vec::new(), total_intermediate: 0, total_ms: 0.0, mode: mode.into(), optimality_certificate: false }
    }

    /// Records a step that started at `since` and returns the current time.
    pub fn record(&mut self, name: impl Into<String>, rows: usize, since: Instant) -> Instant {
        let now = Instant::now();
        let ms = now.duration_since(since).as_secs_f64() * 1e3;
        self.steps.push(Step { name: name.into(), rows: rows as u64, ms });
        self.total_intermediate += rows as u64;
        self.total_ms += ms;
        now
    }

    /// Whether the total equals the sum of the steps.
    pub fn audit(&self) -> bool {
        self.total_intermediate == self.steps.iter().map(|s| s.rows).sum::<u64>()
    }

    /// Step names and cardinalities, without timings.
    pub fn structure(&self) -> Vec<(String, u64)> {
        self.steps.iter().map(|s| (s.name.clone(), s.rows)).collect()
    }
}

/// Query answers as a sorted set of value tuples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultSet {
    pub schema: Vec<Variable>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.schema.iter().map(Variable::as_str)).expect("write to memory");
        for r in &self.rows {
            w.write_record(r.iter().map(Value::as_str)).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv of utf-8 values")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let obj: serde_json::Map<String, serde_json::Value> = self
                .schema
                .iter()
                .zip(r)
                .map(|(k, v)| (k.as_str().to_owned(), serde_json::Value::String(v.as_str().to_owned())))
                .collect();
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Cmjoin,
    Sj,
    Vj,
    Naive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Cmjoin, Algorithm::Sj, Algorithm::Vj, Algorithm::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cmjoin => "cmjoin",
            Algorithm::Sj => "sj",
            Algorithm::Vj => "vj",
            Algorithm::Naive => "naive",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected cmjoin, sj, vj or naive)"))
    }
}

/// Evaluates `q` with the chosen algorithm.
pub fn evaluate(
    algo: Algorithm,
    q: &ValidatedQuery,
    db: &Database,
    exec: Execution,
) -> Result<(ResultSet, Metrics), EngineError> {
    match algo {
        Algorithm::Cmjoin => cmjoin(q, db, &CmjoinOptions { exec, ..CmjoinOptions::default() }),
        Algorithm::Sj => sj(q, db),
        Algorithm::Vj => vj(q, db),
        Algorithm::Naive => naive(q, db),
    }
}

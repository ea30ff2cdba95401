use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};

use crate::engine::Database;
use crate::ingest::{dewey_encode, write_relation_csv, write_tree_xml, LabeledTree, Relation, Value};
use crate::model::{parse_query, validate, Query, ValidatedQuery};

/// Name of the query file written next to the data files.
pub const QUERY_FILE: &str = "query.cmcq";

/// A query with in-memory data, keyed by the source strings the query uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub query: Query,
    pub relations: Vec<(String, Relation)>,
    pub trees: Vec<(String, LabeledTree)>,
    /// Source text for trees that should be written verbatim instead of as
    /// generated XML.
    pub documents: Vec<(String, String)>,
}

impl Fixture {
    pub fn validated(&self) -> ValidatedQuery {
        validate(self.query.clone()).expect("generated queries are valid")
    }

    pub fn database(&self) -> Database {
        let mut db = Database::new();
        for (src, r) in &self.relations {
            db.insert_relation(src.clone(), r.clone());
        }
        for (src, t) in &self.trees {
            db.insert_tree(src.clone(), dewey_encode(t));
        }
        db
    }

    /// Writes the data files and the query into `dir` and returns the path
    /// of the query file. Trees without a source document are written as
    /// XML.
    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        for (src, r) in &self.relations {
            std::fs::write(dir.join(src), write_relation_csv(r))?;
        }
        for (src, t) in &self.trees {
            match self.documents.iter().find(|(d, _)| d == src) {
                Some((_, text)) => std::fs::write(dir.join(src), text)?,
                None => std::fs::write(dir.join(src), write_tree_xml(t))?,
            }
        }
        let path = dir.join(QUERY_FILE);
        std::fs::write(&path, self.query.to_string())?;
        Ok(path)
    }

    /// Largest table size and largest per-label node count over all data.
    pub fn max_sizes(&self) -> (usize, usize) {
        let table = self.relations.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
        let mut label = 0;
        for (_, t) in &self.trees {
            let mut count: HashMap<&Value, usize> = HashMap::new();
            let mut stack = vec![t];
            while let Some(n) = stack.pop() {
                *count.entry(&n.label).or_default() += 1;
                stack.extend(&n.children);
            }
            label = label.max(count.into_values().max().unwrap_or(0));
        }
        (table, label)
    }
}

pub(crate) fn relation(source: &str, attrs: &[&str], rows: Vec<Vec<String>>) -> (String, Relation) {
    let name = source.trim_end_matches(".csv");
    let rows = rows.into_iter().map(|r| r.into_iter().map(Value::new).collect()).collect();
    (source.to_owned(), Relation::new(name, attrs.iter().map(|a| a.to_string()).collect(), rows))
}

/// The patient example: patients who are single and whose diagnostic
/// report carries an `abnormal` flag. Patients live in a two-row table, a
/// one-row table selects the marital status, and the reports form one JSON
/// document.
pub fn medical_fixture() -> Fixture {
    let query = parse_query(
        r#"REL Patient(id,name,status) FROM "patients.csv";
           REL Wanted(status) FROM "wanted.csv";
           TREE Reports FROM "reports.json" MATCH report[patient/:id]/flag/abnormal;
           RETURN id,name;"#,
    )
    .expect("fixture query is well-formed");
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let relations = vec![
        relation("patients.csv", &["id", "name", "status"], vec![s(&["1", "Ada", "single"]), s(&["2", "Ben", "married"])]),
        relation("wanted.csv", &["status"], vec![s(&["single"])]),
    ];
    let tree = crate::ingest::parse_tree_json(REPORTS, Path::new("reports.json")).expect("fixture json is valid");
    Fixture {
        query,
        relations,
        trees: vec![("reports.json".into(), tree)],
        documents: vec![("reports.json".into(), REPORTS.into())],
    }
}

const REPORTS: &str = r#"{"reports": [
  {"report": {"patient": "1", "flag": "abnormal"}},
  {"report": {"patient": "2", "flag": "abnormal"}},
  {"report": {"patient": "3", "flag": "normal"}}
]}
"#;

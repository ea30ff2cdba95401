use std::collections::BTreeMap;

use thiserror::Error;

use super::{NodeId, Query, Variable};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("return variable `{0}` is not bound by any relation or pattern node")]
    UnboundReturnVariable(Variable),
    #[error("the return list is empty")]
    EmptyReturn,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Occurrence {
    /// Relation index and column.
    Column(usize, usize),
    Node(NodeId),
}

/// A query whose return list is covered, with every variable resolved to
/// the places it occurs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidatedQuery {
    query: Query,
    occurrences: BTreeMap<Variable, Vec<Occurrence>>,
}

impl ValidatedQuery {
    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn occurrences(&self, v: &Variable) -> &[Occurrence] {
        self.occurrences.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.occurrences.keys()
    }

    /// Groups of pattern nodes that share a variable and must therefore
    /// carry equal labels.
    pub fn label_equalities(&self) -> Vec<(Variable, Vec<NodeId>)> {
        self.occurrences
            .iter()
            .filter_map(|(v, occ)| {
                let nodes: Vec<NodeId> = occ
                    .iter()
                    .filter_map(|o| match o {
                        Occurrence::Node(n) => Some(*n),
                        Occurrence::Column(..) => None,
                    })
                    .collect();
                (nodes.len() > 1).then(|| (v.clone(), nodes))
            })
            .collect()
    }
}

pub fn validate(q: Query) -> Result<ValidatedQuery, ValidationError> {
    if q.return_vars.is_empty() {
        return Err(ValidationError::EmptyReturn);
    }
    let mut occurrences: BTreeMap<Variable, Vec<Occurrence>> = BTreeMap::new();
    for (ri, r) in q.relations.iter().enumerate() {
        for (ci, v) in r.attributes.iter().enumerate() {
            occurrences.entry(v.clone()).or_default().push(Occurrence::Column(ri, ci));
        }
    }
    for p in &q.patterns {
        for n in p.root.preorder() {
            if let Some(v) = n.test.variable() {
                occurrences.entry(v.clone()).or_default().push(Occurrence::Node(n.id));
            }
        }
    }
    if let Some(v) = q.return_vars.iter().find(|v| !occurrences.contains_key(*v)) {
        return Err(ValidationError::UnboundReturnVariable(v.clone()));
    }
    Ok(ValidatedQuery { query: q, occurrences })
}

use std::collections::HashMap;

use crate::model::Attr;

/// A set of fixed-width tuples of interned cells, stored row-major. Label
/// cells are catalog ids and position cells are pre-order node indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub attrs: Vec<Attr>,
    data: Vec<u32>,
    /// Row count, tracked separately so zero-width tables can be non-empty.
    len: usize,
}

impl Table {
    pub fn new(attrs: Vec<Attr>) -> Self {
        Table { attrs, data: Vec::new(), len: 0 }
    }

    pub fn width(&self) -> usize {
        self.attrs.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, row: &[u32]) {
        debug_assert_eq!(row.len(), self.width());
        self.data.extend_from_slice(row);
        self.len += 1;
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.len).map(move |i| self.row(i))
    }

    pub fn column(&self, a: &Attr) -> Option<usize> {
        self.attrs.iter().position(|x| x == a)
    }

    /// Sorts rows and removes duplicates.
    pub fn normalize(&mut self) {
        if self.width() == 0 {
            self.len = self.len.min(1);
            return;
        }
        let mut idx: Vec<usize> = (0..self.len).collect();
        idx.sort_unstable_by(|&a, &b| self.row(a).cmp(self.row(b)));
        idx.dedup_by(|a, b| self.row(*a) == self.row(*b));
        let mut data = Vec::with_capacity(idx.len() * self.width());
        for &i in &idx {
            data.extend_from_slice(self.row(i));
        }
        self.data = data;
        self.len = idx.len();
    }

    /// Keeps the given columns, in the given order, and deduplicates.
    pub fn project(&self, attrs: &[Attr]) -> Table {
        let cols: Vec<usize> = attrs.iter().map(|a| self.column(a).expect("projected column exists")).collect();
        let mut out = Table::new(attrs.to_vec());
        let mut buf = Vec::with_capacity(cols.len());
        for r in self.rows() {
            buf.clear();
            buf.extend(cols.iter().map(|&c| r[c]));
            out.push(&buf);
        }
        out.normalize();
        out
    }

    /// Keeps rows satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&[u32]) -> bool) -> Table {
        let mut out = Table::new(self.attrs.clone());
        for r in self.rows() {
            if keep(r) {
                out.push(r);
            }
        }
        out
    }

    /// Natural join on the shared attributes (a cross product when there are
    /// none). Output columns are this table's, then the other's new ones.
    pub fn natural_join(&self, other: &Table) -> Table {
        let shared: Vec<(usize, usize)> = self
            .attrs
            .iter()
            .enumerate()
            .filter_map(|(i, a)| other.column(a).map(|j| (i, j)))
            .collect();
        let extra: Vec<usize> = (0..other.width()).filter(|j| !shared.iter().any(|s| s.1 == *j)).collect();
        let mut attrs = self.attrs.clone();
        attrs.extend(extra.iter().map(|&j| other.attrs[j].clone()));
        let mut out = Table::new(attrs);

        let mut index: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
        for (i, r) in other.rows().enumerate() {
            index.entry(shared.iter().map(|s| r[s.1]).collect()).or_default().push(i);
        }
        let mut key = Vec::with_capacity(shared.len());
        let mut buf = Vec::with_capacity(out.width());
        for l in self.rows() {
            key.clear();
            key.extend(shared.iter().map(|s| l[s.0]));
            let Some(matches) = index.get(&key) else { continue };
            for &j in matches {
                let r = other.row(j);
                buf.clear();
                buf.extend_from_slice(l);
                buf.extend(extra.iter().map(|&c| r[c]));
                out.push(&buf);
            }
        }
        out
    }
}

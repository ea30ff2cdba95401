use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;
use std::ops::Range;

use super::IngestError;

/// One level of a trie: sorted keys per parent, with the child range of
/// each key in the next level.
#[derive(Clone, Debug)]
struct Level<K> {
    keys: Vec<K>,
    /// `start[i]..start[i + 1]` are the children of key `i`; empty on the
    /// last level.
    start: Vec<usize>,
}

/// A table indexed attribute by attribute. Level `d` holds the distinct
/// values of attribute `d` below each prefix, in ascending order.
#[derive(Clone, Debug)]
pub struct Trie<A, K> {
    attrs: Vec<A>,
    levels: Vec<Level<K>>,
}

impl<A, K: Ord + Clone> Trie<A, K> {
    pub fn attributes(&self) -> &[A] {
        &self.attrs
    }

    pub fn depth(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.first().is_none_or(|l| l.keys.is_empty())
    }

    /// Key positions at the top level.
    pub fn root(&self) -> Range<usize> {
        0..self.levels.first().map_or(0, |l| l.keys.len())
    }

    pub fn keys(&self, level: usize) -> &[K] {
        &self.levels[level].keys
    }

    pub fn key(&self, level: usize, i: usize) -> &K {
        &self.levels[level].keys[i]
    }

    /// Positions of the children of key `i` of `level`.
    pub fn children(&self, level: usize, i: usize) -> Range<usize> {
        let s = &self.levels[level].start;
        s[i]..s[i + 1]
    }

    /// Every root-to-leaf path, in ascending order.
    pub fn rows(&self) -> Vec<Vec<K>> {
        let mut out = Vec::new();
        if self.depth() == 0 {
            return out;
        }
        let mut cur = Vec::with_capacity(self.depth());
        self.walk(0, self.root(), &mut cur, &mut out);
        out
    }

    fn walk(&self, level: usize, range: Range<usize>, cur: &mut Vec<K>, out: &mut Vec<Vec<K>>) {
        for i in range {
            cur.push(self.key(level, i).clone());
            if level + 1 == self.depth() {
                out.push(cur.clone());
            } else {
                self.walk(level + 1, self.children(level, i), cur, out);
            }
            cur.pop();
        }
    }

    /// The first position in `range` whose key is at least `target`, found
    /// by galloping from the front of the range.
    pub fn seek(&self, level: usize, range: Range<usize>, target: &K) -> usize {
        seek(&self.levels[level].keys, range, target)
    }
}

/// Galloping lower bound over a sorted slice range.
pub(crate) fn seek<K: Ord>(keys: &[K], range: Range<usize>, target: &K) -> usize {
    let (mut lo, hi) = (range.start, range.end);
    if lo >= hi || keys[lo] >= *target {
        return lo;
    }
    // keys[lo] < target: double the step until overshooting.
    let mut step = 1;
    while lo + step < hi && keys[lo + step] < *target {
        lo += step;
        step *= 2;
    }
    let upper = (lo + step + 1).min(hi);
    lo + 1 + keys[lo + 1..upper].partition_point(|k| k < target)
}

/// Builds a trie over `rows` (columns named by `attrs`) with the columns
/// reordered to follow `order`.
pub fn build_trie<A, K>(attrs: &[A], rows: &[Vec<K>], order: &[A]) -> Result<Trie<A, K>, IngestError>
where
    A: Clone + PartialEq + Display,
    K: Ord + Clone,
{
    let mut cols: Vec<(usize, usize)> = Vec::with_capacity(attrs.len());
    for (c, a) in attrs.iter().enumerate() {
        let rank = order.iter().position(|o| o == a).ok_or_else(|| IngestError::UnknownAttribute(a.to_string()))?;
        cols.push((rank, c));
    }
    cols.sort_unstable();
    let attrs_sorted: Vec<A> = cols.iter().map(|&(_, c)| attrs[c].clone()).collect();
    let mut data: Vec<Vec<K>> = rows.iter().map(|r| cols.iter().map(|&(_, c)| r[c].clone()).collect()).collect();
    data.sort_unstable();
    data.dedup();

    let depth = attrs_sorted.len();
    let mut levels: Vec<Level<K>> = (0..depth).map(|_| Level { keys: Vec::new(), start: Vec::new() }).collect();
    for (r, row) in data.iter().enumerate() {
        // The first level at which this row departs from the previous one.
        let fresh_from = if r == 0 {
            0
        } else {
            let prev = &data[r - 1];
            (0..depth).find(|&d| prev[d] != row[d]).unwrap_or(depth)
        };
        for d in fresh_from..depth {
            if d + 1 < depth {
                let next_len = levels[d + 1].keys.len();
                levels[d].start.push(next_len);
            }
            levels[d].keys.push(row[d].clone());
        }
    }
    for d in 0..depth.saturating_sub(1) {
        let total = levels[d + 1].keys.len();
        levels[d].start.push(total);
    }
    Ok(Trie { attrs: attrs_sorted, levels })
}

/// Attributes by descending number of tables they occur in; ties in
/// ascending order.
pub fn global_order<A: Ord + Clone + Hash>(tables: &[Vec<A>]) -> Vec<A> {
    let mut count: HashMap<&A, usize> = HashMap::new();
    for t in tables {
        let mut seen: Vec<&A> = t.iter().collect();
        seen.sort();
        seen.dedup();
        for a in seen {
            *count.entry(a).or_default() += 1;
        }
    }
    let mut attrs: Vec<(&A, usize)> = count.into_iter().collect();
    attrs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    attrs.into_iter().map(|(a, _)| a.clone()).collect()
}

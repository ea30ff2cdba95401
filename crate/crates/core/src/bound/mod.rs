//! Worst-case output size bounds for CMCQs.
//!
//! A bound is `N^rho` where `rho` is the optimum of a packing LP. Tree
//! patterns contribute one inequality per parent-child path. Descendant axes
//! are first rewritten away by conversion or split, which yields a family of
//! canonical suites. The bound is the largest LP optimum over that family,
//! found by a branch-and-bound search whose relaxations cut every remaining
//! descendant axis.

mod lp;
mod suites;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

pub use lp::{lp_max, LpSolution, Rational};
pub(crate) use lp::{solve_packing, Packing};
pub use suites::{
    convert, highest_descendant_axis, pc_paths, split, NodeSet, Optimizations, Split, Suite,
    SuiteDescription, SuiteError, SuiteStats,
};

use crate::model::{
    branch_nodes, merge_patterns, Attr, NodeId, PatternNode, PatternPath, RelationAtom, ValidatedQuery,
};
use crate::par::Execution;

/// `sum(vars) <= 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Inequality {
    pub vars: BTreeSet<Attr>,
}

impl Inequality {
    pub fn new(vars: impl IntoIterator<Item = Attr>) -> Self {
        Inequality { vars: vars.into_iter().collect() }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self.vars.iter().map(|a| a.to_string()).collect();
        write!(f, "{} <= 1", terms.join(" + "))
    }
}

/// Which attributes take part in the LP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundMode {
    /// Labels only (rho3).
    LabelsOnly,
    /// Labels and every node position (rho1).
    AllPositions,
    /// Labels and the positions of branch nodes (rho2).
    BranchPositions,
    /// Labels and positions of one root-to-leaf path, without relations
    /// (rho4).
    SinglePath(PatternPath),
}

impl BoundMode {
    pub fn name(&self) -> String {
        match self {
            BoundMode::AllPositions => "r1".into(),
            BoundMode::BranchPositions => "r2".into(),
            BoundMode::LabelsOnly => "r3".into(),
            BoundMode::SinglePath(p) => format!("r4({})", p.leaf()),
        }
    }
}

pub fn relation_inequalities(relations: &[RelationAtom]) -> Vec<Inequality> {
    relations
        .iter()
        .map(|r| Inequality::new(r.attributes.iter().cloned().map(Attr::Label)))
        .collect()
}

/// One inequality per root-to-leaf path of a child-only tree. In
/// [`BoundMode::BranchPositions`] the branch nodes of `t` itself keep their
/// positions.
pub fn pc_path_inequalities(t: &PatternNode, mode: &BoundMode) -> Result<Vec<Inequality>, SuiteError> {
    let positions: BTreeSet<NodeId> = match mode {
        BoundMode::LabelsOnly => BTreeSet::new(),
        BoundMode::AllPositions | BoundMode::SinglePath(_) => t.preorder().iter().map(|n| n.id).collect(),
        BoundMode::BranchPositions => branch_nodes(t),
    };
    let labels: HashMap<NodeId, Attr> = t.preorder().iter().map(|n| (n.id, n.label_attr())).collect();
    Ok(pc_paths(t)?
        .into_iter()
        .map(|path| {
            Inequality::new(path.iter().flat_map(|id| {
                let pos = positions.contains(id).then_some(Attr::Pos(*id));
                std::iter::once(labels[id].clone()).chain(pos)
            }))
        })
        .collect())
}

/// Maps node sets and relation inequalities onto the LP variables of one
/// mode. Attributes outside the objective are dropped, which is safe because
/// they only tighten constraints.
#[derive(Clone, Debug)]
pub(crate) struct Lowering {
    attrs: Vec<Attr>,
    index: HashMap<Attr, u32>,
    node_vars: HashMap<NodeId, Vec<u32>>,
    node_tables: Vec<Vec<u32>>,
}

/// Whether the lowered set sums to at most one under `x`.
fn satisfied(set: &[u32], x: &[f64]) -> bool {
    set.iter().map(|&i| x[i as usize]).sum::<f64>() <= 1.0 + 1e-9
}

impl Lowering {
    fn new(relations: &[RelationAtom], roots: &[&PatternNode], positions: &BTreeSet<NodeId>) -> Self {
        let mut attrs: BTreeSet<Attr> = relations
            .iter()
            .flat_map(|r| r.attributes.iter().cloned().map(Attr::Label))
            .collect();
        for root in roots {
            for n in root.preorder() {
                if let Some(v) = n.test.variable() {
                    attrs.insert(Attr::Label(v.clone()));
                }
            }
        }
        attrs.extend(positions.iter().map(|&id| Attr::Pos(id)));
        let attrs: Vec<Attr> = attrs.into_iter().collect();
        let index: HashMap<Attr, u32> = attrs.iter().enumerate().map(|(i, a)| (a.clone(), i as u32)).collect();
        let mut node_vars = HashMap::new();
        let mut node_tables = Vec::new();
        for root in roots {
            for n in root.preorder() {
                let mut vars: Vec<u32> = index.get(&n.label_attr()).copied().into_iter().collect();
                if let Some(&p) = index.get(&Attr::Pos(n.id)) {
                    vars.push(p);
                    node_tables.push(vars.clone());
                }
                node_vars.insert(n.id, vars);
            }
        }
        Lowering { attrs, index, node_vars, node_tables }
    }

    fn for_mode(q: &ValidatedQuery, mode: &BoundMode) -> (Self, Vec<Inequality>, Option<PatternNode>) {
        let query = q.query();
        let roots: Vec<&PatternNode> = query.patterns.iter().map(|p| &p.root).collect();
        match mode {
            BoundMode::SinglePath(path) => {
                let chain = path.to_pattern();
                let positions = chain.preorder().iter().map(|n| n.id).collect();
                (Lowering::new(&[], &[&chain], &positions), Vec::new(), Some(chain))
            }
            _ => {
                let positions: BTreeSet<NodeId> = match mode {
                    BoundMode::LabelsOnly => BTreeSet::new(),
                    BoundMode::AllPositions => roots.iter().flat_map(|r| r.preorder()).map(|n| n.id).collect(),
                    _ => roots.iter().flat_map(|r| branch_nodes(r)).collect(),
                };
                let lowering = Lowering::new(&query.relations, &roots, &positions);
                let tree = (!roots.is_empty())
                    .then(|| merge_patterns(&roots.iter().map(|r| (*r).clone()).collect::<Vec<_>>()));
                (lowering, relation_inequalities(&query.relations), tree)
            }
        }
    }

    pub fn objective(&self) -> BTreeSet<Attr> {
        self.attrs.iter().cloned().collect()
    }

    pub fn packing(&self, relations: &[Inequality], structural: &[NodeSet]) -> Packing {
        let mut sets = self.lower_relations(relations);
        sets.extend(structural.iter().map(|s| self.lower(s)));
        self.packing_of(sets)
    }

    /// Variable indices of relation inequalities.
    fn lower_relations(&self, relations: &[Inequality]) -> Vec<Vec<u32>> {
        relations
            .iter()
            .map(|r| r.vars.iter().filter_map(|a| self.index.get(a).copied()).collect())
            .collect()
    }

    /// Variable indices of a structural node set, sorted and distinct.
    fn lower(&self, s: &NodeSet) -> Vec<u32> {
        let mut v: Vec<u32> = s.iter().flat_map(|n| self.node_vars.get(n).into_iter().flatten().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Adds the node tables to already lowered sets.
    fn packing_of(&self, mut sets: Vec<Vec<u32>>) -> Packing {
        sets.extend(self.node_tables.iter().cloned());
        Packing::new(self.attrs.len(), sets)
    }

    /// Whether `x` (indexed like the objective) satisfies every node set.
    pub fn satisfied(&self, sets: &[NodeSet], x: &[f64]) -> bool {
        sets.iter().all(|s| satisfied(&self.lower(s), x))
    }

    fn witness(&self, x: &[Rational]) -> BTreeMap<Attr, Rational> {
        self.attrs
            .iter()
            .zip(x)
            .filter(|(_, v)| !v.is_zero())
            .map(|(a, v)| (a.clone(), v.clone()))
            .collect()
    }

    /// The inequalities of a canonical suite in attribute form.
    fn suite_inequalities(&self, suite: &Suite) -> Result<Vec<Inequality>, SuiteError> {
        let mut structural: Vec<NodeSet> = suite.compensations.clone();
        for t in &suite.trees {
            structural.extend(pc_paths(t)?);
        }
        let attr_of = |i: &u32| self.attrs[*i as usize].clone();
        let mut out = suite.relations.clone();
        for s in &structural {
            out.push(Inequality::new(s.iter().flat_map(|n| self.node_vars.get(n).into_iter().flatten()).map(attr_of)));
        }
        out.extend(self.node_tables.iter().map(|t| Inequality::new(t.iter().map(attr_of))));
        out.retain(|i| !i.vars.is_empty());
        Ok(out)
    }
}

/// A size bound `N^exponent`.
#[derive(Clone, Debug)]
pub struct Bound {
    pub mode: BoundMode,
    pub exponent: Rational,
    /// An optimal LP assignment for the maximizing suite. Missing attributes
    /// are zero.
    pub witness: BTreeMap<Attr, Rational>,
    pub suite: Suite,
    /// All inequalities of the maximizing suite, over objective attributes.
    pub constraints: Vec<Inequality>,
    pub stats: SuiteStats,
}

impl Bound {
    pub fn get(&self, a: &Attr) -> Rational {
        self.witness.get(a).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn report(&self) -> BoundReport {
        BoundReport {
            mode: self.mode.name(),
            exponent: format_rational(&self.exponent),
            witness: self.witness.iter().map(|(a, v)| (a.to_string(), format_rational(v))).collect(),
            suite: self.suite.describe(),
            suites_enumerated: self.stats.suites_enumerated,
            suites_pruned_opt1: self.stats.suites_pruned_opt1,
            suites_pruned_opt2: self.stats.suites_pruned_opt2,
            suites_pruned_bound: self.stats.suites_pruned_bound,
        }
    }

    /// `ceil(n^exponent)`, or `None` if it does not fit in a `u128`.
    pub fn size_for(&self, n: u64) -> Option<u128> {
        ceil_pow(n, &self.exponent)
    }
}

/// JSON form of a [`Bound`].
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub mode: String,
    pub exponent: String,
    pub witness: BTreeMap<String, String>,
    pub suite: SuiteDescription,
    pub suites_enumerated: u64,
    pub suites_pruned_opt1: u64,
    pub suites_pruned_opt2: u64,
    pub suites_pruned_bound: u64,
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Smallest integer `c` with `c >= n^(p/q)`, computed exactly as the
/// smallest `c` with `c^q >= n^p`.
pub fn ceil_pow(n: u64, e: &Rational) -> Option<u128> {
    use num_bigint::BigUint;
    if e.is_negative() {
        return None;
    }
    let p = e.numer().to_u32()?;
    let q = e.denom().to_u32()?;
    let target = BigUint::from(n).pow(p);
    // Binary search on c in [0, n^ceil(p/q)].
    let mut lo = BigUint::zero();
    let mut hi = BigUint::from(n).pow(p.div_ceil(q)).max(BigUint::one());
    while lo < hi {
        let mid: BigUint = (&lo + &hi) >> 1;
        if mid.pow(q) >= target {
            hi = mid;
        } else {
            lo = mid + 1u32;
        }
    }
    lo.to_u128()
}

pub fn compute_bound(q: &ValidatedQuery, mode: BoundMode) -> Bound {
    compute_bound_with(q, mode, Optimizations::default())
}

/// Branch-and-bound over canonical suites. Suites whose relaxation cannot
/// exceed the best value found so far are skipped and counted in
/// `suites_pruned_bound`.
pub fn compute_bound_with(q: &ValidatedQuery, mode: BoundMode, opts: Optimizations) -> Bound {
    let (lowering, relations, tree) = Lowering::for_mode(q, &mode);
    let mut search = suites::Search::new(&lowering, &relations, opts, false);
    search.run(tree, Vec::new());
    let stats = search.stats;
    let best = search.best.expect("a search reaches at least one suite");
    let constraints = lowering.suite_inequalities(&best.suite).expect("canonical suite");
    Bound { witness: lowering.witness(&best.x), exponent: best.value, suite: best.suite, constraints, mode, stats }
}

/// Every canonical suite of a pattern (with the given starting compensation
/// set and relations), as produced by the recursive conversion/split
/// enumeration. The second optimization compares label-only LP values.
pub fn canonical_suites(
    t: &PatternNode,
    ci: &[NodeSet],
    relations: &[Inequality],
    opts: Optimizations,
) -> (Vec<Suite>, SuiteStats) {
    let mut rel_atoms = Vec::new();
    for (i, r) in relations.iter().enumerate() {
        let attributes = r
            .vars
            .iter()
            .filter_map(|a| match a {
                Attr::Label(v) => Some(v.clone()),
                _ => None,
            })
            .collect();
        rel_atoms.push(RelationAtom { name: format!("R{i}"), attributes, source: String::new() });
    }
    let lowering = Lowering::new(&rel_atoms, &[t], &BTreeSet::new());
    let mut search = suites::Search::new(&lowering, relations, opts, true);
    search.run(Some(t.clone()), ci.to_vec());
    let stats = search.stats;
    (search.suites.into_iter().map(|(s, _)| s).collect(), stats)
}

/// The bound by explicit enumeration of all canonical suites (no pruning of
/// any kind), with the suite LPs solved under `exec`. Exponential in the
/// number of descendant axes; meant as a cross-check of [`compute_bound`].
pub fn bound_by_enumeration(q: &ValidatedQuery, mode: &BoundMode, exec: Execution) -> Rational {
    let (lowering, relations, tree) = Lowering::for_mode(q, mode);
    let mut search = suites::Search::new(&lowering, &relations, Optimizations::NONE, true);
    search.run(tree, Vec::new());
    let suites: Vec<Suite> = search.suites.into_iter().map(|(s, _)| s).collect();
    let values = crate::par::map(exec, &suites, |s| {
        let mut structural = s.compensations.clone();
        for t in &s.trees {
            structural.extend(pc_paths(t).expect("canonical"));
        }
        solve_packing(&lowering.packing(&relations, &structural)).0
    });
    values.into_iter().max().unwrap_or_else(Rational::zero)
}

/// The inequalities of a suite under a mode, for display and checking.
pub fn suite_inequalities(q: &ValidatedQuery, mode: &BoundMode, suite: &Suite) -> Result<Vec<Inequality>, SuiteError> {
    Lowering::for_mode(q, mode).0.suite_inequalities(suite)
}

/// The LP objective of a mode.
pub fn objective(q: &ValidatedQuery, mode: &BoundMode) -> BTreeSet<Attr> {
    Lowering::for_mode(q, mode).0.objective()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_query, root_to_leaf_paths, validate, Variable};

    fn vq(src: &str) -> ValidatedQuery {
        validate(parse_query(src).unwrap()).unwrap()
    }

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn lab(s: &str) -> Attr {
        Attr::Label(Variable::new(s))
    }

    const TWO_CHILDREN: &str = r#"REL R1(b,c) FROM "r1.csv"; TREE T FROM "d.xml" MATCH :a[:b]/:c; RETURN a,b,c"#;

    #[test]
    fn triangle() {
        let q = vq(r#"REL R1(a,b) FROM "1"; REL R2(b,c) FROM "2"; REL R3(a,c) FROM "3"; RETURN a,b,c"#);
        let b = compute_bound(&q, BoundMode::LabelsOnly);
        assert_eq!(b.exponent, r(3, 2));
        assert_eq!(relation_inequalities(&q.query().relations).len(), 3);
    }

    #[test]
    fn repeated_relation_attribute_collapses() {
        let q = vq(r#"REL R(a,a) FROM "r"; RETURN a"#);
        assert_eq!(relation_inequalities(&q.query().relations), vec![Inequality::new([lab("a")])]);
    }

    #[test]
    fn three_modes_on_two_children() {
        let q = vq(TWO_CHILDREN);
        assert_eq!(compute_bound(&q, BoundMode::AllPositions).exponent, r(2, 1));
        assert_eq!(compute_bound(&q, BoundMode::BranchPositions).exponent, r(3, 2));
        assert_eq!(compute_bound(&q, BoundMode::LabelsOnly).exponent, r(3, 2));
    }

    #[test]
    fn single_path_bounds() {
        let q = vq(r#"TREE T FROM "t" MATCH :a[:b]//:c; RETURN a"#);
        let paths = root_to_leaf_paths(&q.query().patterns[0].root);
        assert_eq!(compute_bound(&q, BoundMode::SinglePath(paths[0].clone())).exponent, r(1, 1));
        assert_eq!(compute_bound(&q, BoundMode::SinglePath(paths[1].clone())).exponent, r(2, 1));
    }

    #[test]
    fn pc_path_inequalities_with_positions() {
        let q = vq(TWO_CHILDREN);
        let t = &q.query().patterns[0].root;
        let ineqs = pc_path_inequalities(t, &BoundMode::AllPositions).unwrap();
        let p = |i| Attr::Pos(NodeId(i));
        assert_eq!(
            ineqs,
            vec![
                Inequality::new([lab("a"), p(0), lab("b"), p(1)]),
                Inequality::new([lab("a"), p(0), lab("c"), p(2)]),
            ]
        );
        let labels = pc_path_inequalities(t, &BoundMode::LabelsOnly).unwrap();
        assert_eq!(labels[0], Inequality::new([lab("a"), lab("b")]));
    }

    #[test]
    fn witness_is_feasible() {
        let q = vq(TWO_CHILDREN);
        for mode in [BoundMode::AllPositions, BoundMode::BranchPositions, BoundMode::LabelsOnly] {
            let b = compute_bound(&q, mode);
            let total: Rational = b.witness.values().cloned().sum();
            assert_eq!(total, b.exponent);
            for c in &b.constraints {
                let s: Rational = c.vars.iter().map(|a| b.get(a)).sum();
                assert!(s <= Rational::one(), "{c} violated");
            }
        }
    }

    #[test]
    fn descendant_only_is_cubic() {
        let q = vq(r#"TREE T FROM "t" MATCH :a[//:b]//:c; RETURN a"#);
        assert_eq!(compute_bound(&q, BoundMode::LabelsOnly).exponent, r(3, 1));
    }

    #[test]
    fn mixed_axis_winning_suites() {
        let base = r#"TREE T FROM "t" MATCH :a[:b]/:c//:d;"#;
        let alone = vq(&format!("{base} RETURN a"));
        assert_eq!(compute_bound_with(&alone, BoundMode::LabelsOnly, Optimizations::NONE).exponent, r(2, 1));

        let ii = vq(&format!(r#"REL R1(b,c,d) FROM "r"; {base} RETURN a"#));
        let b = compute_bound_with(&ii, BoundMode::LabelsOnly, Optimizations::NONE);
        assert_eq!(b.exponent, r(2, 1));
        assert_eq!(b.suite.trees.len(), 2, "split suite wins");

        let i = vq(&format!(r#"REL R3(b,d) FROM "r"; REL R4(a,c,d) FROM "s"; {base} RETURN a"#));
        let b = compute_bound_with(&i, BoundMode::LabelsOnly, Optimizations::NONE);
        assert_eq!(b.exponent, r(2, 1));
        assert_eq!(b.suite.trees.len(), 1, "converted suite wins");
    }

    #[test]
    fn enumeration_counts_suites() {
        let q = vq(r#"TREE T FROM "t" MATCH :a[//:b]//:c//:d; RETURN a"#);
        let t = &q.query().patterns[0].root;
        let (suites, stats) = canonical_suites(t, &[], &[], Optimizations::NONE);
        assert_eq!(suites.len(), 8);
        assert_eq!(stats.suites_enumerated, 8);
        assert!(suites.iter().all(Suite::is_canonical));
        let chain = vq(r#"TREE T FROM "t" MATCH :a/:b; RETURN a"#);
        let (one, _) = canonical_suites(&chain.query().patterns[0].root, &[], &[], Optimizations::NONE);
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn optimizations_keep_the_bound() {
        let q = vq(r#"REL R1(b,c,d) FROM "r"; TREE T FROM "t" MATCH :a[//:b]//:c//:d; RETURN a"#);
        for mode in [BoundMode::LabelsOnly, BoundMode::AllPositions] {
            let plain = bound_by_enumeration(&q, &mode, Execution::Sequential);
            let fast = compute_bound(&q, mode.clone());
            assert_eq!(plain, fast.exponent);
            let slow = compute_bound_with(&q, mode, Optimizations::NONE);
            assert_eq!(slow.exponent, fast.exponent);
        }
    }

    #[test]
    fn conversion_in_one_branch_keeps_splits_in_another() {
        let q = vq(r#"REL R0(u) FROM "r"; TREE T FROM "t" MATCH d:z[:z//b]/:u[//b/:y][c]/c; RETURN u"#);
        let plain = bound_by_enumeration(&q, &BoundMode::LabelsOnly, Execution::Sequential);
        assert_eq!(plain, r(2, 1));
        assert_eq!(compute_bound(&q, BoundMode::LabelsOnly).exponent, plain);
        let opt1 = Optimizations { opt1: true, opt2: false };
        assert_eq!(compute_bound_with(&q, BoundMode::LabelsOnly, opt1).exponent, plain);
    }

    #[test]
    fn ceil_pow_exact() {
        assert_eq!(ceil_pow(4, &r(3, 2)), Some(8));
        assert_eq!(ceil_pow(2, &r(3, 2)), Some(3));
        assert_eq!(ceil_pow(8, &r(2, 1)), Some(64));
        assert_eq!(ceil_pow(5, &r(0, 1)), Some(1));
    }

    #[test]
    fn report_formats_exponent() {
        let b = compute_bound(&vq(TWO_CHILDREN), BoundMode::LabelsOnly);
        let rep = b.report();
        assert_eq!(rep.exponent, "3/2");
        assert_eq!(rep.mode, "r3");
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("suites_pruned_opt1").is_some());
    }
}

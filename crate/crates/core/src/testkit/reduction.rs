//! Gadget queries and the reduction from 1-IN-3SAT to bound computation.
//! A formula with `m` clauses maps to a query whose label-only bound is `2m`
//! exactly when some assignment makes one literal per clause true.

use std::collections::BTreeSet;
use std::fmt;

use super::TestkitError;
use crate::model::{parse_query, Query, RelationAtom, TreePattern, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GadgetKind {
    K1,
    K2,
}

impl GadgetKind {
    pub fn arity(self) -> usize {
        match self {
            GadgetKind::K1 => 4,
            GadgetKind::K2 => 6,
        }
    }
}

/// One gadget as a standalone query: a pattern plus relations, returning
/// every variable.
///
/// `K1(A,B,C,D)` is `A[C]/D//B` with `R1(B,C)` and `R2(B,D)`. Its bound is 2,
/// attained either by `A=B=1` (split) or by `C=D=1` (conversion).
///
/// `K2(A,B,C,D,E,F)` is `D[A]/F/B//C/E` with `R1(A,F)`, `R2(A,C,E)` and
/// `R3(B,C,E)`.
pub fn gadget(kind: GadgetKind, names: &[&str]) -> Result<Query, TestkitError> {
    if names.len() != kind.arity() {
        return Err(TestkitError::ArityMismatch { expected: kind.arity(), got: names.len() });
    }
    let distinct: BTreeSet<&&str> = names.iter().collect();
    if distinct.len() != names.len() {
        return Err(TestkitError::ArityMismatch { expected: kind.arity(), got: distinct.len() });
    }
    let text = match (kind, names) {
        (GadgetKind::K1, [a, b, c, d]) => format!(
            r#"REL R1({b},{c}) FROM "r1.csv"; REL R2({b},{d}) FROM "r2.csv";
               TREE T FROM "t.xml" MATCH :{a}[:{c}]/:{d}//:{b};"#
        ),
        (GadgetKind::K2, [a, b, c, d, e, f]) => format!(
            r#"REL R1({a},{f}) FROM "r1.csv"; REL R2({a},{c},{e}) FROM "r2.csv";
               REL R3({b},{c},{e}) FROM "r3.csv";
               TREE T FROM "t.xml" MATCH :{d}[:{a}]/:{f}/:{b}//:{c}/:{e};"#
        ),
        _ => unreachable!("arity checked"),
    };
    let text = format!("{text} RETURN {};", names.join(","));
    Ok(parse_query(&text).expect("gadget text is well-formed"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    /// Zero-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, positive: false }
    }

    fn holds(self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.positive { "" } else { "~" };
        write!(f, "{neg}x{}", self.var + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause3(pub [Literal; 3]);

impl fmt::Display for Clause3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} | {} | {})", self.0[0], self.0[1], self.0[2])
    }
}

/// Brute-force 1-IN-3 satisfiability: some assignment makes exactly one
/// literal of every clause true. Returns the first such assignment.
pub fn one_in_three_sat(clauses: &[Clause3]) -> Option<Vec<bool>> {
    let n = clauses.iter().flat_map(|c| c.0).map(|l| l.var + 1).max().unwrap_or(0);
    assert!(n <= 24, "brute force is limited to small formulas");
    (0u32..1 << n).find_map(|bits| {
        let assignment: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
        clauses
            .iter()
            .all(|c| c.0.iter().filter(|l| l.holds(&assignment)).count() == 1)
            .then_some(assignment)
    })
}

/// The pair of query variables standing for literal `lit` of clause `i`
/// (one-based clause index in the names, as in `x1_2` / `a1_2`).
pub fn literal_vars(i: usize, lit: Literal) -> (String, String) {
    let (v, w) = if lit.positive { ("x", "a") } else { ("y", "b") };
    (format!("{v}{}_{}", i + 1, lit.var + 1), format!("{w}{}_{}", i + 1, lit.var + 1))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReductionOptions {
    /// Express every relation as a parent-child chain pattern instead, so the
    /// query uses tree patterns only.
    pub relations_as_paths: bool,
}

/// Builds the query for a 1-IN-3SAT formula.
///
/// Per clause, three K2 gadgets force one literal pair to the "true" side.
/// For every variable occurring positively in clause `i` and negatively in
/// clause `j`, one K1 forbids both literals being true, and four K2 gadgets
/// over the remaining literals of the two clauses forbid both being false.
pub fn reduce_1in3sat(clauses: &[Clause3], opts: ReductionOptions) -> Result<Query, TestkitError> {
    if clauses.len() < 2 {
        return Err(TestkitError::TooFewClauses(clauses.len()));
    }
    let mut parts: Vec<(GadgetKind, Vec<String>)> = Vec::new();
    let pair = |i: usize, l: Literal| {
        let (x, a) = literal_vars(i, l);
        vec![x, a]
    };
    for (i, c) in clauses.iter().enumerate() {
        let [k, p, d] = c.0;
        for (head, rest) in [(k, [p, d]), (p, [k, d]), (d, [k, p])] {
            let mut names = pair(i, head);
            names.extend(pair(i, rest[0]));
            names.extend(pair(i, rest[1]));
            parts.push((GadgetKind::K2, names));
        }
    }
    for (i, ci) in clauses.iter().enumerate() {
        for (j, cj) in clauses.iter().enumerate() {
            for (ki, &pos) in ci.0.iter().enumerate() {
                if !pos.positive {
                    continue;
                }
                for (kj, &neg) in cj.0.iter().enumerate() {
                    if neg.positive || neg.var != pos.var {
                        continue;
                    }
                    let mut names = pair(i, pos);
                    names.extend(pair(j, neg));
                    parts.push((GadgetKind::K1, names));

                    let others_i: Vec<Literal> = (0..3).filter(|&t| t != ki).map(|t| ci.0[t]).collect();
                    let others_j: Vec<Literal> = (0..3).filter(|&t| t != kj).map(|t| cj.0[t]).collect();
                    for (ha, side_a, hb, side_b) in [(i, &others_i, j, &others_j), (j, &others_j, i, &others_i)] {
                        for &head in side_a.iter() {
                            let mut names = pair(ha, head);
                            names.extend(pair(hb, side_b[0]));
                            names.extend(pair(hb, side_b[1]));
                            parts.push((GadgetKind::K2, names));
                        }
                    }
                }
            }
        }
    }

    let mut out = Query::default();
    let mut return_vars: Vec<Variable> = Vec::new();
    for (g, (kind, names)) in parts.into_iter().enumerate() {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let q = gadget(kind, &refs)?;
        let tag = format!("G{g}");
        for r in q.relations {
            if opts.relations_as_paths {
                out.patterns.push(relation_as_path(&tag, &r));
            } else {
                out.relations.push(RelationAtom { name: format!("{tag}_{}", r.name), ..r });
            }
        }
        for p in q.patterns {
            out.patterns.push(TreePattern { name: format!("{tag}_{}", p.name), ..p });
        }
        for v in q.return_vars {
            if !return_vars.contains(&v) {
                return_vars.push(v);
            }
        }
    }
    out.return_vars = return_vars;
    out.renumber();
    Ok(out)
}

fn relation_as_path(tag: &str, r: &RelationAtom) -> TreePattern {
    let chain: Vec<String> = r.attributes.iter().map(|v| format!(":{v}")).collect();
    let text = format!(r#"TREE P FROM "{}.xml" MATCH {}; RETURN {}"#, r.name.to_lowercase(), chain.join("/"), r.attributes[0]);
    let mut q = parse_query(&text).expect("chain pattern is well-formed");
    let mut p = q.patterns.remove(0);
    p.name = format!("{tag}_{}", r.name);
    p
}

/// A 1-in-3 satisfiable three-clause formula, `(x1 | ~x2 | x3)(~x1 | x2 | x3)(~x1 | x4 | x5)`.
pub fn sample_formula() -> Vec<Clause3> {
    use Literal as L;
    vec![
        Clause3([L::pos(0), L::neg(1), L::pos(2)]),
        Clause3([L::neg(0), L::pos(1), L::pos(2)]),
        Clause3([L::neg(0), L::pos(3), L::pos(4)]),
    ]
}

/// All formulas with `2..=max_clauses` clauses over at most `max_vars`
/// variables. A formula is a set of distinct clauses and each clause has
/// three distinct variables. One representative is kept per class under
/// variable renaming and reordering of clauses or literals.
pub fn formulas_up_to(max_clauses: usize, max_vars: usize) -> Vec<Vec<Clause3>> {
    let mut clauses = Vec::new();
    for a in 0..max_vars {
        for b in a + 1..max_vars {
            for c in b + 1..max_vars {
                for signs in 0..8u8 {
                    let lit = |v, bit: u8| Literal { var: v, positive: signs >> bit & 1 == 1 };
                    clauses.push(Clause3([lit(a, 0), lit(b, 1), lit(c, 2)]));
                }
            }
        }
    }
    let perms = permutations(max_vars);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut pick = Vec::new();
    fn rec(
        start: usize,
        left: usize,
        clauses: &[Clause3],
        pick: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if pick.len() >= 2 {
            visit(pick);
        }
        if left == 0 {
            return;
        }
        for i in start..clauses.len() {
            pick.push(i);
            rec(i + 1, left - 1, clauses, pick, visit);
            pick.pop();
        }
    }
    rec(0, max_clauses, &clauses, &mut pick, &mut |idx: &[usize]| {
        let formula: Vec<Clause3> = idx.iter().map(|&i| clauses[i]).collect();
        let canon = perms.iter().map(|p| rename(&formula, p)).min().expect("at least one permutation");
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    });
    out
}

fn rename(formula: &[Clause3], perm: &[usize]) -> Vec<Clause3> {
    let mut out: Vec<Clause3> = formula
        .iter()
        .map(|c| {
            let mut lits = c.0.map(|l| Literal { var: perm[l.var], positive: l.positive });
            lits.sort();
            Clause3(lits)
        })
        .collect();
    out.sort();
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

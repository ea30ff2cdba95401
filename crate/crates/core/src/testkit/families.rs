use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fixture::{relation, Fixture};
use super::TestkitError;
use crate::ingest::LabeledTree;
use crate::model::parse_query;

/// Parameterized instances on which a query reaches its worst-case output
/// size. In the first four families every pattern variable is typed by a
/// unary relation listing the labels it may take, so a node can only match
/// the pattern node it was built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// `a[//b]//c` on a chain of `n` a-nodes above `n` b-leaves and `n`
    /// c-leaves: `n^3` answers.
    DescendantFan,
    /// `a[b/c]/d` on one a-node with `n` b/c pairs and `n` d-leaves below:
    /// `n^2` answers.
    ChildFan,
    /// `a[b]/c//d` on one a-node with `n` b-leaves and `n` c/d pairs below.
    MixedFan,
    /// `a[b]/c//d` on a chain of `n` (a, b, c) triples with all `n` d-leaves
    /// under the deepest c.
    MixedChain,
    /// `R1(b,c)` with `a[b/:b]/c/:c`: one root with `n` tagged b-values and
    /// `n` tagged c-values; `R1` pairs the first `ceil(sqrt n)` values of
    /// each side, capped at `n` rows. Answers: `n`. Matching the pattern
    /// alone yields `n^2` position combinations.
    TriangleLike,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] = [
        FamilyKind::DescendantFan,
        FamilyKind::ChildFan,
        FamilyKind::MixedFan,
        FamilyKind::MixedChain,
        FamilyKind::TriangleLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::DescendantFan => "descendant-fan",
            FamilyKind::ChildFan => "child-fan",
            FamilyKind::MixedFan => "mixed-fan",
            FamilyKind::MixedChain => "mixed-chain",
            FamilyKind::TriangleLike => "triangle-like",
        }
    }

    /// The exact number of answers on the instance of scale `n`.
    pub fn expected_answers(self, n: u64) -> u64 {
        match self {
            FamilyKind::DescendantFan => n.pow(3),
            FamilyKind::ChildFan | FamilyKind::MixedFan | FamilyKind::MixedChain => n.pow(2),
            FamilyKind::TriangleLike => n,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = TestkitError;

    fn from_str(s: &str) -> Result<Self, TestkitError> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TestkitError::UnsupportedKind(s.to_owned()))
    }
}

fn leaf(label: String) -> LabeledTree {
    LabeledTree::leaf(label)
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn column(values: &[String]) -> Vec<Vec<String>> {
    values.iter().map(|v| vec![v.clone()]).collect()
}

/// Builds the instance of `kind` at scale `n`. The seed only permutes
/// sibling order, which changes no answer.
pub fn gen_family(kind: FamilyKind, n: usize, seed: u64) -> Result<Fixture, TestkitError> {
    if n == 0 {
        return Err(TestkitError::InvalidScale(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c, d) = (labels("a", n), labels("b", n), labels("c", n), labels("d", n));
    let typed = |vars: &[(&str, &[String])]| {
        vars.iter()
            .map(|(v, vals)| relation(&format!("{}.csv", v.to_uppercase()), &[v], column(vals)))
            .collect::<Vec<_>>()
    };
    let typing_atoms = |vars: &[&str]| {
        vars.iter()
            .map(|v| format!("REL {}({v}) FROM \"{}.csv\";", v.to_uppercase(), v.to_uppercase()))
            .collect::<String>()
    };

    let (query_text, relations, tree) = match kind {
        FamilyKind::DescendantFan => {
            let mut bottom: Vec<LabeledTree> = b.iter().chain(&c).cloned().map(leaf).collect();
            bottom.shuffle(&mut rng);
            let mut node = LabeledTree::node(a[n - 1].clone(), bottom);
            for label in a[..n - 1].iter().rev() {
                node = LabeledTree::node(label.clone(), vec![node]);
            }
            (
                format!("{} TREE T FROM \"t.xml\" MATCH :a[//:b]//:c; RETURN a,b,c;", typing_atoms(&["a", "b", "c"])),
                typed(&[("a", &a), ("b", &b), ("c", &c)]),
                node,
            )
        }
        FamilyKind::ChildFan => {
            let mut kids: Vec<LabeledTree> = (0..n)
                .map(|i| LabeledTree::node(b[i].clone(), vec![leaf(c[i].clone())]))
                .chain(d.iter().cloned().map(leaf))
                .collect();
            kids.shuffle(&mut rng);
            (
                format!("{} TREE T FROM \"t.xml\" MATCH :a[:b/:c]/:d; RETURN a,b,c,d;", typing_atoms(&["a", "b", "c", "d"])),
                typed(&[("a", &a[..1]), ("b", &b), ("c", &c), ("d", &d)]),
                LabeledTree::node(a[0].clone(), kids),
            )
        }
        FamilyKind::MixedFan => {
            let mut kids: Vec<LabeledTree> = b
                .iter()
                .cloned()
                .map(leaf)
                .chain((0..n).map(|i| LabeledTree::node(c[i].clone(), vec![leaf(d[i].clone())])))
                .collect();
            kids.shuffle(&mut rng);
            (
                format!("{} TREE T FROM \"t.xml\" MATCH :a[:b]/:c//:d; RETURN a,b,c,d;", typing_atoms(&["a", "b", "c", "d"])),
                typed(&[("a", &a[..1]), ("b", &b), ("c", &c), ("d", &d)]),
                LabeledTree::node(a[0].clone(), kids),
            )
        }
        FamilyKind::MixedChain => {
            let mut ds: Vec<LabeledTree> = d.iter().cloned().map(leaf).collect();
            ds.shuffle(&mut rng);
            let mut below = ds;
            for i in (0..n).rev() {
                let ci = LabeledTree::node(c[i].clone(), below);
                let mut kids = vec![leaf(b[i].clone()), ci];
                kids.shuffle(&mut rng);
                below = vec![LabeledTree::node(a[i].clone(), kids)];
            }
            (
                format!("{} TREE T FROM \"t.xml\" MATCH :a[:b]/:c//:d; RETURN a,b,c,d;", typing_atoms(&["a", "b", "c", "d"])),
                typed(&[("a", &a), ("b", &b), ("c", &c), ("d", &d)]),
                below.pop().expect("n >= 1"),
            )
        }
        FamilyKind::TriangleLike => {
            let k = (1..=n).find(|k| k * k >= n).expect("k = n works");
            let rows: Vec<Vec<String>> =
                (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).take(n).map(|(i, j)| vec![b[i].clone(), c[j].clone()]).collect();
            let mut kids: Vec<LabeledTree> = (0..n)
                .map(|i| LabeledTree::node("b", vec![leaf(b[i].clone())]))
                .chain((0..n).map(|i| LabeledTree::node("c", vec![leaf(c[i].clone())])))
                .collect();
            kids.shuffle(&mut rng);
            (
                "REL R1(b,c) FROM \"r1.csv\"; TREE T FROM \"t.xml\" MATCH :a[b/:b]/c/:c; RETURN a,b,c;".to_owned(),
                vec![relation("r1.csv", &["b", "c"], rows)],
                LabeledTree::node(a[0].clone(), kids),
            )
        }
    };
    let query = parse_query(&query_text).expect("family query is well-formed");
    let fixture = Fixture { query, relations, trees: vec![("t.xml".into(), tree)], documents: Vec::new() };
    let (table, label) = fixture.max_sizes();
    assert!(table <= n && label <= n, "{kind} at n = {n} breaks the size assumptions");
    Ok(fixture)
}

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fixture::{relation, Fixture};
use crate::ingest::{dewey_encode, EncodedTree, LabeledTree};
use crate::model::{Axis, LabelTest, NodeId, PatternNode, Query, RelationAtom, TreePattern, Variable};

/// Size limits for [`random_instance`].
#[derive(Clone, Copy, Debug)]
pub struct RandomLimits {
    pub max_tree_nodes: usize,
    pub max_relation_rows: usize,
    pub max_pattern_nodes: usize,
    /// Instances whose estimated brute-force work exceeds this are redrawn.
    pub max_work: f64,
}

impl Default for RandomLimits {
    fn default() -> Self {
        RandomLimits { max_tree_nodes: 60, max_relation_rows: 40, max_pattern_nodes: 6, max_work: 2e5 }
    }
}

const LABELS: [&str; 4] = ["a", "b", "c", "d"];
const VARS: [&str; 5] = ["x", "y", "z", "u", "w"];

/// A random tree in which every new node hangs below a uniformly chosen
/// earlier node.
pub fn random_tree(rng: &mut impl Rng, nodes: usize) -> LabeledTree {
    let nodes = nodes.max(1);
    let mut parent = vec![usize::MAX];
    let mut labels = vec![LABELS[rng.gen_range(0..LABELS.len())].to_owned()];
    for i in 1..nodes {
        parent.push(rng.gen_range(0..i));
        labels.push(LABELS[rng.gen_range(0..LABELS.len())].to_owned());
    }
    let mut built: Vec<Option<LabeledTree>> = labels.into_iter().map(|l| Some(LabeledTree::leaf(l))).collect();
    for i in (1..nodes).rev() {
        let child = built[i].take().expect("built once");
        // Children were visited from last to first; restore their order.
        built[parent[i]].as_mut().expect("parent precedes child").children.insert(0, child);
    }
    built[0].take().expect("root")
}

/// A random pattern with ids starting at `first_id`. A node tests a
/// variable (possibly repeated) or a constant, sometimes both.
pub fn random_pattern(rng: &mut impl Rng, nodes: usize, first_id: u32) -> PatternNode {
    let test = |rng: &mut ChaCha8Rng| {
        let v = Variable::new(VARS[rng.gen_range(0..VARS.len())]);
        let c = LABELS[rng.gen_range(0..LABELS.len())].to_owned();
        match rng.gen_range(0..10) {
            0..=5 => LabelTest::Variable(v),
            6..=7 => LabelTest::Constant(c),
            _ => LabelTest::Both(c, v),
        }
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    let nodes = nodes.max(1);
    let mut flat: Vec<PatternNode> = Vec::with_capacity(nodes);
    let mut parent = vec![usize::MAX];
    flat.push(PatternNode::leaf(NodeId(first_id), test(&mut local), None));
    for i in 1..nodes {
        let axis = if local.gen_bool(0.5) { Axis::Child } else { Axis::Descendant };
        parent.push(local.gen_range(0..i));
        flat.push(PatternNode::leaf(NodeId(first_id + i as u32), test(&mut local), Some(axis)));
    }
    let mut built: Vec<Option<PatternNode>> = flat.into_iter().map(Some).collect();
    for i in (1..nodes).rev() {
        let child = built[i].take().expect("built once");
        built[parent[i]].as_mut().expect("parent precedes child").children.insert(0, child);
    }
    let mut root = built[0].take().expect("root");
    // Ids in pre-order, as the parser assigns them.
    let mut next = first_id;
    renumber(&mut root, &mut next);
    root
}

fn renumber(n: &mut PatternNode, next: &mut u32) {
    n.id = NodeId(*next);
    *next += 1;
    for c in &mut n.children {
        renumber(c, next);
    }
}

/// Upper bound on the number of embeddings of `p` in `t`, ignoring repeated
/// variables.
pub fn embedding_estimate(t: &EncodedTree, p: &PatternNode) -> f64 {
    fn count(t: &EncodedTree, p: &PatternNode, at: usize) -> f64 {
        if let Some(c) = p.test.constant() {
            if t.node(at).label.as_str() != c {
                return 0.0;
            }
        }
        let mut total = 1.0;
        for child in &p.children {
            let sum: f64 = match child.axis.unwrap_or(Axis::Child) {
                Axis::Child => t.children(at).map(|c| count(t, child, c)).sum(),
                Axis::Descendant => t.descendants(at).map(|c| count(t, child, c)).sum(),
            };
            total *= sum;
            if total == 0.0 {
                break;
            }
        }
        total
    }
    (0..t.len()).map(|i| count(t, p, i)).sum()
}

/// A random instance with up to two trees and two patterns plus up to
/// three relations, all over one small label alphabet. Draws whose
/// brute-force work would exceed `limits.max_work` are redrawn from the
/// same stream.
pub fn random_instance(seed: u64, limits: RandomLimits) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let f = draw(&mut rng, &limits);
        let mut work = 1.0;
        for p in &f.query.patterns {
            let t = &f.trees.iter().find(|(s, _)| *s == p.source).expect("tree for pattern").1;
            work *= embedding_estimate(&dewey_encode(t), &p.root).max(1.0);
        }
        for (_, r) in &f.relations {
            work *= r.len().max(1) as f64;
        }
        if work <= limits.max_work {
            return f;
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, limits: &RandomLimits) -> Fixture {
    let n_trees = rng.gen_range(1..=2);
    let trees: Vec<(String, LabeledTree)> = (0..n_trees)
        .map(|i| {
            let size = rng.gen_range(1..=limits.max_tree_nodes);
            (format!("t{i}.xml"), random_tree(rng, size))
        })
        .collect();

    let mut query = Query::default();
    let mut next_id = 0;
    for pi in 0..rng.gen_range(1..=2) {
        let size = rng.gen_range(1..=limits.max_pattern_nodes);
        let root = random_pattern(rng, size, next_id);
        next_id += root.node_count() as u32;
        let source = trees[rng.gen_range(0..trees.len())].0.clone();
        query.patterns.push(TreePattern { name: format!("T{pi}"), source, root });
    }

    let mut relations = Vec::new();
    for ri in 0..rng.gen_range(0..=3) {
        let arity = rng.gen_range(1..=3);
        let vars: Vec<Variable> = (0..arity).map(|_| Variable::new(VARS[rng.gen_range(0..VARS.len())])).collect();
        let rows: Vec<Vec<String>> = (0..rng.gen_range(0..=limits.max_relation_rows))
            .map(|_| (0..arity).map(|_| LABELS[rng.gen_range(0..LABELS.len())].to_owned()).collect())
            .collect();
        let source = format!("r{ri}.csv");
        let cols: Vec<String> = (0..arity).map(|c| format!("c{c}")).collect();
        let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
        relations.push(relation(&source, &col_refs, rows));
        query.relations.push(RelationAtom { name: format!("R{ri}"), attributes: vars, source });
    }

    let mut vars = query.variables();
    if vars.is_empty() {
        // Give the query something to return.
        let v = Variable::new(VARS[0]);
        query.patterns[0].root.test = LabelTest::Variable(v.clone());
        vars.push(v);
    }
    vars.shuffle(rng);
    let keep = rng.gen_range(1..=vars.len());
    vars.truncate(keep);
    vars.sort();
    query.return_vars = vars;

    let used: Vec<String> = query.patterns.iter().map(|p| p.source.clone()).collect();
    let trees = trees.into_iter().filter(|(s, _)| used.contains(s)).collect();
    Fixture { query, relations, trees, documents: Vec::new() }
}

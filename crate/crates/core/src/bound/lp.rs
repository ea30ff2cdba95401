//! Exact simplex for the packing LPs that size bounds reduce to:
//! maximize the sum of a variable set subject to `sum(S) <= 1` constraints
//! and `0 <= x <= 1`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedDiv, CheckedMul, CheckedSub, One, Signed, Zero};

use super::Inequality;
use crate::model::Attr;

pub type Rational = BigRational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub value: Rational,
    /// One optimal vertex. Variables not listed are zero.
    pub witness: BTreeMap<Attr, Rational>,
}

impl LpSolution {
    pub fn get(&self, a: &Attr) -> Rational {
        self.witness.get(a).cloned().unwrap_or_else(Rational::zero)
    }
}

/// Constraints over variable indices `0..n`, deduplicated and with every set
/// that is contained in another set removed (it is implied).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Packing {
    pub n: usize,
    pub sets: Vec<Vec<u32>>,
}

impl Packing {
    pub fn new(n: usize, mut sets: Vec<Vec<u32>>) -> Self {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        sets.retain(|s| !s.is_empty());
        sets.sort_unstable_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        sets.dedup();
        let mut kept: Vec<Vec<u32>> = Vec::with_capacity(sets.len());
        for s in sets {
            if !kept.iter().any(|k| is_subset(&s, k)) {
                kept.push(s);
            }
        }
        kept.sort_unstable();
        Packing { n, sets: kept }
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    if small.len() > big.len() {
        return false;
    }
    let mut j = 0;
    for &x in small {
        while j < big.len() && big[j] < x {
            j += 1;
        }
        if j == big.len() || big[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

/// Maximizes the sum of `objective` subject to the constraints. Variables
/// outside the objective only ever tighten constraints, so they sit at zero
/// in some optimum and are dropped before solving.
pub fn lp_max(objective: &BTreeSet<Attr>, constraints: &[Inequality]) -> LpSolution {
    let vars: Vec<&Attr> = objective.iter().collect();
    let index: BTreeMap<&Attr, u32> = vars.iter().enumerate().map(|(i, a)| (*a, i as u32)).collect();
    let sets = constraints
        .iter()
        .map(|c| c.vars.iter().filter_map(|a| index.get(a).copied()).collect())
        .collect();
    let packing = Packing::new(vars.len(), sets);
    let (value, x) = solve_packing(&packing);
    let witness = vars
        .into_iter()
        .zip(x)
        .filter(|(_, v)| !v.is_zero())
        .map(|(a, v)| (a.clone(), v))
        .collect();
    LpSolution { value, witness }
}

/// Variables that appear in no constraint sit at their box bound of 1. The
/// others are bounded by 1 through their constraints already, so the
/// tableau needs no box rows.
struct Reduced {
    cols: Vec<usize>,
    rows: Vec<Vec<usize>>,
    free: usize,
}

impl Reduced {
    fn new(p: &Packing) -> Self {
        let mut covered = vec![false; p.n];
        for s in &p.sets {
            for &v in s {
                covered[v as usize] = true;
            }
        }
        let cols: Vec<usize> = (0..p.n).filter(|&i| covered[i]).collect();
        let mut col_of = vec![usize::MAX; p.n];
        for (j, &v) in cols.iter().enumerate() {
            col_of[v] = j;
        }
        let rows = p.sets.iter().map(|s| s.iter().map(|&v| col_of[v as usize]).collect()).collect();
        Reduced { free: p.n - cols.len(), cols, rows }
    }
}

/// Solves a reduced packing LP exactly; returns the optimum and the values
/// of the variables `0..n`.
pub(crate) fn solve_packing(p: &Packing) -> (Rational, Vec<Rational>) {
    let red = Reduced::new(p);
    let mut x = vec![Rational::one(); p.n];
    let free = Rational::from_integer(BigInt::from(red.free));
    if red.cols.is_empty() {
        return (free, x);
    }
    let (value, sub) = match Tableau::<Ratio<i64>>::new(&red.rows, red.cols.len()).solve() {
        Some(v) => (v.value.to_big(), v.x.iter().map(Exact::to_big).collect::<Vec<_>>()),
        None => {
            let v = Tableau::<BigRational>::new(&red.rows, red.cols.len())
                .solve()
                .expect("big rationals do not overflow");
            (v.value, v.x)
        }
    };
    for (j, v) in red.cols.iter().enumerate() {
        x[*v] = sub[j].clone();
    }
    (value + free, x)
}

/// A floating-point solve. Its duals yield a certified upper bound on
/// request.
#[derive(Clone, Debug)]
pub(crate) struct Approx {
    pub value: f64,
    pub x: Vec<f64>,
    /// Duals indexed like the packing sets; empty when nothing was solved.
    y: Vec<f64>,
    free: usize,
}

impl Approx {
    /// An exact upper bound on the optimum of `p`, the packing this was
    /// solved from, obtained by rounding the duals.
    pub fn upper(&self, p: &Packing) -> Rational {
        if self.y.is_empty() {
            return Rational::from_integer(BigInt::from(self.free));
        }
        let y: Vec<Rational> = self.y.iter().map(|&d| round_small(d.max(0.0))).collect();
        dual_bound(p, &y)
    }
}

pub(crate) fn approx_packing(p: &Packing) -> Approx {
    let red = Reduced::new(p);
    let mut x = vec![1.0; p.n];
    if red.cols.is_empty() {
        return Approx { value: red.free as f64, x, y: Vec::new(), free: red.free };
    }
    let v = Tableau::<f64>::new(&red.rows, red.cols.len()).solve().expect("floats do not overflow");
    for (j, c) in red.cols.iter().enumerate() {
        x[*c] = v.x[j];
    }
    Approx { value: v.value + red.free as f64, x, y: v.y, free: red.free }
}

/// Weak duality: for any `y >= 0` over the sets, the optimum is at most
/// `sum(y) + sum_v max(0, 1 - cover_v(y))`.
pub(crate) fn dual_bound(p: &Packing, y: &[Rational]) -> Rational {
    let mut cover = vec![Rational::zero(); p.n];
    for (s, ys) in p.sets.iter().zip(y) {
        if ys.is_zero() {
            continue;
        }
        for &v in s {
            cover[v as usize] += ys;
        }
    }
    let one = Rational::one();
    let slack: Rational = cover.iter().filter(|c| **c < one).map(|c| &one - c).sum();
    y.iter().sum::<Rational>() + slack
}

/// The closest fraction with a small denominator, by continued fractions.
fn round_small(v: f64) -> Rational {
    const MAX_DEN: i64 = 10_000;
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = v;
    for _ in 0..32 {
        let a = r.floor();
        if a > 1e12 {
            break;
        }
        let a = a as i64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DEN {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 == 0 {
        return Rational::zero();
    }
    Rational::new(BigInt::from(h1), BigInt::from(k1))
}

/// Field operations that may report overflow.
trait Exact: Clone + PartialOrd + Sized {
    fn nil() -> Self;
    fn unit() -> Self;
    fn is_nil(&self) -> bool;
    fn positive(&self) -> bool;
    fn negative(&self) -> bool;
    /// Equality, with a tolerance for floating point.
    fn same(&self, o: &Self) -> bool;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn to_big(&self) -> BigRational;
}

impl Exact for Ratio<i64> {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn same(&self, o: &Self) -> bool {
        self == o
    }
    fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }
}

impl Exact for BigRational {
    fn nil() -> Self {
        Zero::zero()
    }
    fn unit() -> Self {
        One::one()
    }
    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }
    fn positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn same(&self, o: &Self) -> bool {
        self == o
    }
    fn to_big(&self) -> BigRational {
        self.clone()
    }
}

const EPS: f64 = 1e-9;

impl Exact for f64 {
    fn nil() -> Self {
        0.0
    }
    fn unit() -> Self {
        1.0
    }
    fn is_nil(&self) -> bool {
        self.abs() <= EPS
    }
    fn positive(&self) -> bool {
        *self > EPS
    }
    fn negative(&self) -> bool {
        *self < -EPS
    }
    fn same(&self, o: &Self) -> bool {
        (self - o).abs() <= EPS
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn to_big(&self) -> BigRational {
        BigRational::from_float(*self).unwrap_or_else(BigRational::zero)
    }
}

/// An optimal basic solution: objective value, primal values of the
/// structural variables and dual values of the constraints.
struct Vertex<F> {
    value: F,
    x: Vec<F>,
    y: Vec<F>,
}

/// Condensed simplex tableau. Row `i < m` reads
/// `x_basic[i] + sum_j a[i][j] * x_nonbasic[j] = b[i]`; row `m` holds the
/// negated reduced costs and the objective value. Variable labels `0..n`
/// are structural, `n..n+m` are slacks. Bland's rule keeps degenerate
/// pivots from cycling.
struct Tableau<F> {
    m: usize,
    n: usize,
    a: Vec<Vec<F>>,
    b: Vec<F>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
}

impl<F: Exact> Tableau<F> {
    fn new(rows: &[Vec<usize>], n: usize) -> Self {
        let m = rows.len();
        let mut a = vec![vec![F::nil(); n]; m + 1];
        for (i, r) in rows.iter().enumerate() {
            for &j in r {
                a[i][j] = F::unit();
            }
        }
        let neg_one = F::nil().sub(&F::unit()).expect("small");
        for j in 0..n {
            a[m][j] = neg_one.clone();
        }
        let mut b = vec![F::unit(); m];
        b.push(F::nil());
        Tableau { m, n, a, b, basic: (n..n + m).collect(), nonbasic: (0..n).collect() }
    }

    fn solve(mut self) -> Option<Vertex<F>> {
        // Steepest reduced cost first; Bland's rule past the limit rules out
        // cycling on degenerate vertices.
        let limit = 2 * (self.m + self.n);
        for step in 0.. {
            let improving = (0..self.n).filter(|&j| self.a[self.m][j].negative());
            let entering = if step < limit {
                improving.min_by(|&i, &j| {
                    self.a[self.m][i].partial_cmp(&self.a[self.m][j]).expect("no NaN").then(i.cmp(&j))
                })
            } else {
                improving.min_by_key(|&j| self.nonbasic[j])
            };
            let Some(k) = entering else { break };
            let mut leave: Option<(usize, F)> = None;
            for i in 0..self.m {
                if self.a[i][k].positive() {
                    let ratio = self.b[i].div(&self.a[i][k])?;
                    let better = match &leave {
                        None => true,
                        Some((r, best)) => {
                            let tie = ratio.same(best);
                            (!tie && ratio < *best) || (tie && self.basic[i] < self.basic[*r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            // Every column has a positive entry in some constraint row, so the
            // LP is bounded and a leaving row always exists.
            let (r, _) = leave.expect("packing LPs are bounded");
            self.pivot(r, k)?;
        }
        let mut x = vec![F::nil(); self.n];
        for (i, &v) in self.basic.iter().enumerate() {
            if v < self.n {
                x[v] = self.b[i].clone();
            }
        }
        let mut y = vec![F::nil(); self.m];
        for (j, &v) in self.nonbasic.iter().enumerate() {
            if v >= self.n {
                y[v - self.n] = self.a[self.m][j].clone();
            }
        }
        Some(Vertex { value: self.b[self.m].clone(), x, y })
    }

    fn pivot(&mut self, r: usize, k: usize) -> Option<()> {
        let p = self.a[r][k].clone();
        let inv = F::unit().div(&p)?;
        let row_r: Vec<F> = self.a[r].iter().map(|v| v.mul(&inv)).collect::<Option<_>>()?;
        let b_r = self.b[r].mul(&inv)?;
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.a[i][k].clone();
            if f.is_nil() {
                continue;
            }
            for j in 0..self.n {
                if j == k {
                    continue;
                }
                if !row_r[j].is_nil() {
                    self.a[i][j] = self.a[i][j].sub(&f.mul(&row_r[j])?)?;
                }
            }
            self.a[i][k] = F::nil().sub(&f.mul(&inv)?)?;
            self.b[i] = self.b[i].sub(&f.mul(&b_r)?)?;
        }
        let mut new_r = row_r;
        new_r[k] = inv;
        self.a[r] = new_r;
        self.b[r] = b_r;
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[k]);
        Some(())
    }
}

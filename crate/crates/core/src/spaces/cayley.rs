//! Cayley graphs of finite groups.
//!
//! Group elements are enumerated by breadth-first search from the identity,
//! so point `0` is always the identity and the graph metric is the word
//! metric `d(x, y) = |x^{-1} y|` for the chosen generating set.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spaces::{Dist, FiniteSpace};

/// Desk-scale cap on the number of group elements (the multiplication table
/// is stored densely).
pub const MAX_GROUP_ORDER: usize = 2500;

/// A finite group given by its multiplication law on some element type.
pub trait FiniteGroupLaw {
    type Elem: Clone + Eq + Hash + Debug;

    fn identity(&self) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Self::Elem;
    /// Order of the ambient group when known; used to detect generating sets
    /// that only reach a proper subgroup.
    fn order(&self) -> Option<usize>;
    fn label(&self, a: &Self::Elem) -> String {
        format!("{a:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CyclicGroup {
    pub n: u64,
}

impl FiniteGroupLaw for CyclicGroup {
    type Elem = u64;
    fn identity(&self) -> u64 {
        0
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.n
    }
    fn inv(&self, a: &u64) -> u64 {
        (self.n - a % self.n) % self.n
    }
    fn order(&self) -> Option<usize> {
        Some(self.n as usize)
    }
    fn label(&self, a: &u64) -> String {
        a.to_string()
    }
}

/// Direct product `Z/n_1 x ... x Z/n_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductGroup {
    pub moduli: Vec<u64>,
}

impl FiniteGroupLaw for ProductGroup {
    type Elem = Vec<u64>;
    fn identity(&self) -> Vec<u64> {
        vec![0; self.moduli.len()]
    }
    fn mul(&self, a: &Vec<u64>, b: &Vec<u64>) -> Vec<u64> {
        a.iter()
            .zip(b)
            .zip(&self.moduli)
            .map(|((x, y), n)| (x + y) % n)
            .collect()
    }
    fn inv(&self, a: &Vec<u64>) -> Vec<u64> {
        a.iter().zip(&self.moduli).map(|(x, n)| (n - x % n) % n).collect()
    }
    fn order(&self) -> Option<usize> {
        Some(self.moduli.iter().product::<u64>() as usize)
    }
}

/// Group given by an explicit multiplication table `table[a][b] = a*b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableGroup {
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl TableGroup {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|r| r.len() != n || r.iter().any(|&x| x >= n)) {
            return Err(Error::input("multiplication table must be a square table of element indices"));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x))
            .ok_or_else(|| Error::input("multiplication table has no identity"))?;
        let mut inverse = vec![0; n];
        for (a, inv) in inverse.iter_mut().enumerate() {
            *inv = (0..n)
                .find(|&b| table[a][b] == identity)
                .ok_or_else(|| Error::input(format!("element {a} has no inverse")))?;
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::input(format!("table is not associative at ({a},{b},{c})")));
                    }
                }
            }
        }
        Ok(Self {
            table,
            identity,
            inverse,
        })
    }
}

impl FiniteGroupLaw for TableGroup {
    type Elem = usize;
    fn identity(&self) -> usize {
        self.identity
    }
    fn mul(&self, a: &usize, b: &usize) -> usize {
        self.table[*a][*b]
    }
    fn inv(&self, a: &usize) -> usize {
        self.inverse[*a]
    }
    fn order(&self) -> Option<usize> {
        Some(self.table.len())
    }
}

/// 2x2 invertible matrices over `Z/p`, stored row-major `[a, b, c, d]`. The
/// Cayley space is the subgroup generated by the given matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixModP {
    pub p: u64,
}

impl MatrixModP {
    pub fn det(&self, m: &[u64; 4]) -> u64 {
        let p = self.p;
        (m[0] * m[3] % p + p - m[1] * m[2] % p) % p
    }

    fn inv_mod(&self, x: u64) -> Option<u64> {
        let p = self.p;
        (1..p).find(|&y| x * y % p == 1)
    }

    pub fn reduce(&self, m: [i64; 4]) -> [u64; 4] {
        let p = self.p as i64;
        m.map(|x| x.rem_euclid(p) as u64)
    }

    pub fn is_invertible(&self, m: &[u64; 4]) -> bool {
        self.inv_mod(self.det(m)).is_some()
    }
}

impl FiniteGroupLaw for MatrixModP {
    type Elem = [u64; 4];
    fn identity(&self) -> [u64; 4] {
        [1, 0, 0, 1]
    }
    fn mul(&self, a: &[u64; 4], b: &[u64; 4]) -> [u64; 4] {
        let p = self.p;
        [
            (a[0] * b[0] + a[1] * b[2]) % p,
            (a[0] * b[1] + a[1] * b[3]) % p,
            (a[2] * b[0] + a[3] * b[2]) % p,
            (a[2] * b[1] + a[3] * b[3]) % p,
        ]
    }
    fn inv(&self, a: &[u64; 4]) -> [u64; 4] {
        let p = self.p;
        let di = self.inv_mod(self.det(a)).expect("invertible matrix");
        [
            a[3] * di % p,
            (p - a[1]) % p * di % p,
            (p - a[2]) % p * di % p,
            a[0] * di % p,
        ]
    }
    fn order(&self) -> Option<usize> {
        None
    }
}

/// Index-level group law on the points of a space whose basepoint is the
/// identity. `mul` may be partial (finite balls of infinite groups).
pub trait GroupLaw {
    fn space(&self) -> &Arc<FiniteSpace>;
    fn identity(&self) -> usize {
        self.space().basepoint()
    }
    fn mul(&self, a: usize, b: usize) -> Option<usize>;
    fn inv(&self, a: usize) -> Option<usize>;
    /// Word length, read off the metric.
    fn length(&self, a: usize) -> Dist {
        self.space().dist(self.identity(), a)
    }
    fn len(&self) -> usize {
        self.space().len()
    }
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cayley graph of a finite group with a dense multiplication table.
#[derive(Clone, Debug)]
pub struct CayleySpace {
    space: Arc<FiniteSpace>,
    mul: Vec<u32>,
    inv: Vec<u32>,
    /// Symmetric generating set (point indices), identity removed.
    generators: Vec<usize>,
    /// Images of the marked free generators, in order.
    marking: Vec<usize>,
    labels: Vec<String>,
}

/// Builds the Cayley space of `group` with respect to a symmetric generating
/// set. The marking (used to evaluate words) is the list as given.
pub fn build_cayley_space<G: FiniteGroupLaw>(group: &G, generators: &[G::Elem]) -> Result<CayleySpace> {
    for (i, g) in generators.iter().enumerate() {
        let gi = group.inv(g);
        if !generators.contains(&gi) {
            return Err(Error::NonSymmetricGenerators { index: i });
        }
    }
    build_marked(group, generators, generators)
}

impl CayleySpace {
    /// Cayley space for a marked quotient: the generating set is the images
    /// together with their inverses; the marking is the images alone.
    pub fn marked<G: FiniteGroupLaw>(group: &G, images: &[G::Elem]) -> Result<Self> {
        let mut symmetric: Vec<G::Elem> = Vec::new();
        for g in images {
            for h in [g.clone(), group.inv(g)] {
                if !symmetric.contains(&h) {
                    symmetric.push(h);
                }
            }
        }
        build_marked(group, &symmetric, images)
    }

    pub fn arc_space(&self) -> Arc<FiniteSpace> {
        Arc::clone(&self.space)
    }

    pub fn order(&self) -> usize {
        self.space.len()
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn marking(&self) -> &[usize] {
        &self.marking
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn mul_idx(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order() + b] as usize
    }

    pub fn inv_idx(&self, a: usize) -> usize {
        self.inv[a] as usize
    }

    /// Evaluates a word in the marked generators; letter `+(i+1)` is marked
    /// generator `i`, `-(i+1)` its inverse.
    pub fn eval_word(&self, letters: &[i32]) -> Result<usize> {
        let mut x = 0usize;
        for &l in letters {
            let i = l.unsigned_abs() as usize;
            if l == 0 || i > self.marking.len() {
                return Err(Error::input(format!("letter {l} outside the marking of rank {}", self.marking.len())));
            }
            let g = self.marking[i - 1];
            let g = if l > 0 { g } else { self.inv_idx(g) };
            x = self.mul_idx(x, g);
        }
        Ok(x)
    }
}

fn build_marked<G: FiniteGroupLaw>(group: &G, generators: &[G::Elem], marking: &[G::Elem]) -> Result<CayleySpace> {
    let e = group.identity();
    let gens: Vec<G::Elem> = {
        let mut v: Vec<G::Elem> = Vec::new();
        for g in generators {
            if *g != e && !v.contains(g) {
                v.push(g.clone());
            }
        }
        v
    };
    let mut elems = vec![e.clone()];
    let mut index: HashMap<G::Elem, usize> = HashMap::from([(e, 0)]);
    let mut head = 0;
    while head < elems.len() {
        let x = elems[head].clone();
        head += 1;
        for g in &gens {
            let y = group.mul(&x, g);
            if !index.contains_key(&y) {
                if elems.len() >= MAX_GROUP_ORDER {
                    return Err(Error::input(format!(
                        "generated group exceeds {MAX_GROUP_ORDER} elements"
                    )));
                }
                index.insert(y.clone(), elems.len());
                elems.push(y);
            }
        }
    }
    let n = elems.len();
    if let Some(order) = group.order() {
        if n != order {
            return Err(Error::input(format!(
                "generators do not generate the group: they reach {n} of {order} elements (Cayley graph disconnected)"
            )));
        }
    }
    let lookup = |x: &G::Elem| -> Result<usize> {
        index
            .get(x)
            .copied()
            .ok_or_else(|| Error::input("group law is not closed on the generated set"))
    };
    let mut mul = Vec::with_capacity(n * n);
    for a in &elems {
        for b in &elems {
            mul.push(lookup(&group.mul(a, b))? as u32);
        }
    }
    let inv = elems
        .iter()
        .map(|a| lookup(&group.inv(a)).map(|i| i as u32))
        .collect::<Result<Vec<_>>>()?;
    let gen_idx: Vec<usize> = gens.iter().map(&lookup).collect::<Result<_>>()?;
    let mut edges = Vec::new();
    for x in 0..n {
        for &g in &gen_idx {
            edges.push((x, mul[x * n + g] as usize));
        }
    }
    let space = FiniteSpace::from_edges(n, &edges, 0)?;
    let marking = marking.iter().map(&lookup).collect::<Result<_>>()?;
    Ok(CayleySpace {
        space: Arc::new(space),
        mul,
        inv,
        generators: gen_idx,
        marking,
        labels: elems.iter().map(|x| group.label(x)).collect(),
    })
}

impl GroupLaw for CayleySpace {
    fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }
    fn identity(&self) -> usize {
        0
    }
    fn mul(&self, a: usize, b: usize) -> Option<usize> {
        Some(self.mul_idx(a, b))
    }
    fn inv(&self, a: usize) -> Option<usize> {
        Some(self.inv_idx(a))
    }
}

/// Oracle-friendly shorthand: `Z/n` marked by `+1`.
pub fn cyclic(n: u64) -> Result<CayleySpace> {
    CayleySpace::marked(&CyclicGroup { n }, &[1 % n.max(1)])
}

/// `(Z/n)^2` marked by the two unit vectors.
pub fn torus_group(n: u64) -> Result<CayleySpace> {
    let g = ProductGroup { moduli: vec![n, n] };
    CayleySpace::marked(&g, &[vec![1 % n, 0], vec![0, 1 % n]])
}

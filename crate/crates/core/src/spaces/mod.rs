//! Finite metric spaces with integer (graph) metrics.
//!
//! A [`FiniteSpace`] carries its full distance table. Spaces are built from
//! edge lists (graph metric), from explicit distance tables, or as Cayley
//! graphs of finite groups ([`cayley`]).

pub mod cayley;
pub mod color;
pub mod geometry;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cayley::{
    build_cayley_space, CayleySpace, CyclicGroup, FiniteGroupLaw, GroupLaw, MatrixModP, ProductGroup,
    TableGroup,
};
pub use color::{cover_multiplicity, greedy_color_cover, AnnularCover, Coloring, ColoringReport};
pub use geometry::{annular_decomposition, girth, hyperbolicity_delta, AnnularDecomposition, Delta, Girth};

/// Distance value used throughout; spaces are connected so every entry is finite.
pub type Dist = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteSpace {
    n: usize,
    dist: Vec<Dist>,
    neighbors: Vec<Vec<usize>>,
    basepoint: usize,
}

impl FiniteSpace {
    /// Graph metric of an undirected graph. Self-loops and repeated edges are
    /// ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], basepoint: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a space needs at least one point"));
        }
        if basepoint >= n {
            return Err(Error::input(format!("basepoint {basepoint} out of range for {n} points")));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::input(format!("edge ({u},{v}) out of range for {n} points")));
            }
            if u != v {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        let dist = all_pairs_bfs(&neighbors)?;
        Ok(Self {
            n,
            dist,
            neighbors,
            basepoint,
        })
    }

    /// Metric space from a full distance table; the metric axioms are checked.
    /// Adjacency is the distance-one relation.
    pub fn from_distance_table(table: Vec<Vec<Dist>>, basepoint: usize) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::input("a space needs at least one point"));
        }
        if basepoint >= n {
            return Err(Error::input(format!("basepoint {basepoint} out of range for {n} points")));
        }
        if table.iter().any(|row| row.len() != n) {
            return Err(Error::input("distance table is not square"));
        }
        for x in 0..n {
            if table[x][x] != 0 {
                return Err(Error::input(format!("d({x},{x}) is not zero")));
            }
            for y in 0..n {
                if table[x][y] != table[y][x] {
                    return Err(Error::input(format!("d({x},{y}) != d({y},{x})")));
                }
                if x != y && table[x][y] == 0 {
                    return Err(Error::input(format!("distinct points {x},{y} at distance 0")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if table[x][z] > table[x][y] + table[y][z] {
                        return Err(Error::input(format!("triangle inequality fails at ({x},{y},{z})")));
                    }
                }
            }
        }
        let neighbors = (0..n)
            .map(|x| (0..n).filter(|&y| table[x][y] == 1).collect())
            .collect();
        Ok(Self {
            n,
            dist: table.into_iter().flatten().collect(),
            neighbors,
            basepoint,
        })
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges, 0).expect("path graph is connected")
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges, 0).expect("cycle graph is connected")
    }

    /// `rows x cols` grid with wraparound in both directions.
    pub fn torus(rows: usize, cols: usize) -> Self {
        let idx = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                edges.push((idx(r, c), idx(r, (c + 1) % cols)));
                edges.push((idx(r, c), idx((r + 1) % rows, c)));
            }
        }
        Self::from_edges(rows * cols, &edges, 0).expect("torus is connected")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn with_basepoint(&self, basepoint: usize) -> Result<Self> {
        if basepoint >= self.n {
            return Err(Error::input(format!("basepoint {basepoint} out of range")));
        }
        Ok(Self {
            basepoint,
            ..self.clone()
        })
    }

    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> Dist {
        self.dist[x * self.n + y]
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.neighbors[x]
    }

    /// Maximum number of neighbours at distance one.
    pub fn generator_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, nb) in self.neighbors.iter().enumerate() {
            for &v in nb {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn diameter(&self) -> Dist {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    pub fn eccentricity(&self, x: usize) -> Dist {
        (0..self.n).map(|y| self.dist(x, y)).max().unwrap_or(0)
    }

    /// Closed ball, ascending point order.
    pub fn ball(&self, center: usize, radius: Dist) -> Vec<usize> {
        (0..self.n).filter(|&y| self.dist(center, y) <= radius).collect()
    }

    pub fn set_diameter(&self, points: &[usize]) -> Dist {
        let mut d = 0;
        for (i, &x) in points.iter().enumerate() {
            for &y in &points[i + 1..] {
                d = d.max(self.dist(x, y));
            }
        }
        d
    }

    /// `min d(u, v)` over `u in a`, `v in b`; `None` if either set is empty.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> Option<Dist> {
        a.iter()
            .flat_map(|&u| b.iter().map(move |&v| (u, v)))
            .map(|(u, v)| self.dist(u, v))
            .min()
    }

    /// Whether the adjacency relation generates the metric (true for spaces
    /// built from edges).
    pub fn is_graph_metric(&self) -> bool {
        all_pairs_bfs(&self.neighbors).map(|d| d == self.dist).unwrap_or(false)
    }

    /// Relabel points by a permutation: new point `perm[x]` is old point `x`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::input("permutation length differs from point count"));
        }
        let mut inv = vec![usize::MAX; self.n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= self.n || inv[new] != usize::MAX {
                return Err(Error::input("not a permutation"));
            }
            inv[new] = old;
        }
        let table = (0..self.n)
            .map(|x| (0..self.n).map(|y| self.dist(inv[x], inv[y])).collect())
            .collect();
        Self::from_distance_table(table, perm[self.basepoint])
    }

    pub fn to_json(&self) -> SpaceJson {
        SpaceJson {
            points: self.n,
            edges: self.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            basepoint: self.basepoint,
        }
    }

    /// Short content hash (hex) of the canonical JSON serialisation, used to
    /// tie reports and operator files to a space.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.to_json()).expect("serialisable");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }
}

/// On-disk space format: `{points, edges, basepoint}`. Distances are
/// recomputed on load.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SpaceJson {
    pub points: usize,
    pub edges: Vec<[usize; 2]>,
    pub basepoint: usize,
}

impl SpaceJson {
    pub fn build(&self) -> Result<FiniteSpace> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        FiniteSpace::from_edges(self.points, &edges, self.basepoint)
    }
}

pub fn load_space_json(text: &str) -> Result<FiniteSpace> {
    let raw: SpaceJson = serde_json::from_str(text)?;
    raw.build()
}

fn all_pairs_bfs(neighbors: &[Vec<usize>]) -> Result<Vec<Dist>> {
    let n = neighbors.len();
    let mut dist = vec![Dist::MAX; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &v in &neighbors[u] {
                if row[v] == Dist::MAX {
                    row[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        if let Some(unreached) = row.iter().position(|&d| d == Dist::MAX) {
            return Err(Error::Disconnected { from: s, unreached });
        }
    }
    Ok(dist)
}

/// A finite cover by point subsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub members: Vec<Vec<usize>>,
    pub diameter_bound: Dist,
}

impl Cover {
    /// Validates coverage and diameters; member lists are sorted and deduplicated.
    pub fn new(space: &FiniteSpace, members: Vec<Vec<usize>>) -> Result<Self> {
        let mut covered = vec![false; space.len()];
        let mut clean = Vec::with_capacity(members.len());
        for (i, mut m) in members.into_iter().enumerate() {
            m.sort_unstable();
            m.dedup();
            if m.is_empty() {
                return Err(Error::input(format!("cover member {i} is empty")));
            }
            for &x in &m {
                if x >= space.len() {
                    return Err(Error::input(format!("cover member {i} names point {x} out of range")));
                }
                covered[x] = true;
            }
            clean.push(m);
        }
        if let Some(x) = covered.iter().position(|&c| !c) {
            return Err(Error::input(format!("point {x} is not covered")));
        }
        let diameter_bound = clean.iter().map(|m| space.set_diameter(m)).max().unwrap_or(0);
        Ok(Self {
            members: clean,
            diameter_bound,
        })
    }

    /// The single-member cover by the whole space.
    pub fn trivial(space: &FiniteSpace) -> Self {
        Self::new(space, vec![(0..space.len()).collect()]).expect("whole space covers itself")
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_cycle_metrics() {
        let p = FiniteSpace::path(10);
        assert_eq!(p.dist(0, 9), 9);
        assert_eq!(p.diameter(), 9);
        let c = FiniteSpace::cycle(12);
        assert_eq!(c.dist(0, 6), 6);
        assert_eq!(c.dist(2, 11), 3);
        assert_eq!(c.diameter(), 6);
        assert_eq!(c.generator_degree(), 2);
    }

    #[test]
    fn disconnected_edges_rejected() {
        let err = FiniteSpace::from_edges(4, &[(0, 1), (2, 3)], 0).unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }));
    }

    #[test]
    fn distance_table_checks_triangle_inequality() {
        let bad = vec![vec![0, 1, 5], vec![1, 0, 1], vec![5, 1, 0]];
        assert!(FiniteSpace::from_distance_table(bad, 0).is_err());
        let good = vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]];
        let s = FiniteSpace::from_distance_table(good, 0).unwrap();
        assert!(s.is_graph_metric());
    }

    #[test]
    fn json_round_trip_recomputes_distances() {
        let t = FiniteSpace::torus(3, 4);
        let json = serde_json::to_string(&t.to_json()).unwrap();
        let back = load_space_json(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.content_hash(), t.content_hash());
        assert_ne!(FiniteSpace::cycle(12).content_hash(), FiniteSpace::path(12).content_hash());
    }

    #[test]
    fn cover_validation() {
        let p = FiniteSpace::path(5);
        assert!(Cover::new(&p, vec![vec![0, 1], vec![3, 4]]).is_err());
        let c = Cover::new(&p, vec![vec![1, 0, 2], vec![2, 3, 4]]).unwrap();
        assert_eq!(c.diameter_bound, 2);
        assert_eq!(c.members[0], vec![0, 1, 2]);
    }
}

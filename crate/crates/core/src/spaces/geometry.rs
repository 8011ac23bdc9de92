//! Girth, four-point hyperbolicity and annular decompositions.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{Dist, FiniteSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Girth {
    Cycle(Dist),
    Acyclic,
}

impl Girth {
    pub fn length(self) -> Option<Dist> {
        match self {
            Girth::Cycle(g) => Some(g),
            Girth::Acyclic => None,
        }
    }
}

impl fmt::Display for Girth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Girth::Cycle(g) => write!(f, "{g}"),
            Girth::Acyclic => f.write_str("acyclic"),
        }
    }
}

/// Length of the shortest cycle of the distance-one adjacency graph.
///
/// BFS from every root; a non-tree edge `(u, v)` closes a walk of length
/// `d(u) + d(v) + 1`, and the minimum over all roots is the girth.
pub fn girth(space: &FiniteSpace) -> Girth {
    let n = space.len();
    let mut best = Dist::MAX;
    let mut depth = vec![Dist::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        depth.fill(Dist::MAX);
        parent.fill(usize::MAX);
        depth[root] = 0;
        queue.clear();
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            if 2 * depth[u] + 1 >= best {
                break;
            }
            for &v in space.neighbors(u) {
                if depth[v] == Dist::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                } else if parent[u] != v {
                    best = best.min(depth[u] + depth[v] + 1);
                }
            }
        }
    }
    if best == Dist::MAX {
        Girth::Acyclic
    } else {
        Girth::Cycle(best)
    }
}

/// Hyperbolicity constant stored as `2δ` so half-integer values stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Delta {
    pub twice: Dist,
}

impl Delta {
    /// Name of the δ convention, carried into reports.
    pub const CONVENTION: &'static str =
        "four-point: d(x,y)+d(z,w) <= max(d(x,z)+d(y,w), d(x,w)+d(y,z)) + 2*delta";

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Smallest integer upper bound.
    pub fn ceil(self) -> Dist {
        self.twice.div_ceil(2)
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}.5", self.twice / 2)
        }
    }
}

/// Default refusal threshold for the quartic quadruple scan.
pub const DEFAULT_DELTA_POINT_LIMIT: usize = 160;

/// Exact four-point δ over all quadruples, `O(n^4)`; refuses spaces with more
/// than `max_points` points.
pub fn hyperbolicity_delta(space: &FiniteSpace, max_points: usize) -> Result<Delta> {
    let n = space.len();
    if n > max_points {
        return Err(Error::input(format!(
            "four-point scan refused: {n} points exceeds the limit of {max_points}"
        )));
    }
    let d = |a, b| space.dist(a, b);
    let mut twice = 0;
    for x in 0..n {
        for y in x + 1..n {
            let dxy = d(x, y);
            for z in y + 1..n {
                let (dxz, dyz) = (d(x, z), d(y, z));
                for w in z + 1..n {
                    let s1 = dxy + d(z, w);
                    let s2 = dxz + d(y, w);
                    let s3 = d(x, w) + dyz;
                    let (hi, mid) = top_two(s1, s2, s3);
                    twice = twice.max(hi - mid);
                }
            }
        }
    }
    Ok(Delta { twice })
}

fn top_two(a: Dist, b: Dist, c: Dist) -> (Dist, Dist) {
    let mut v = [a, b, c];
    v.sort_unstable();
    (v[2], v[1])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnularDecomposition {
    pub width: Dist,
    pub basepoint: usize,
    /// Part `k` holds the points with `d(x, x0)` in `[k*width, (k+1)*width)`.
    pub parts: Vec<Vec<usize>>,
}

impl AnnularDecomposition {
    pub fn part_of(&self, space: &FiniteSpace, x: usize) -> usize {
        (space.dist(self.basepoint, x) / self.width) as usize
    }
}

pub fn annular_decomposition(space: &FiniteSpace, width: Dist) -> Result<AnnularDecomposition> {
    if width == 0 {
        return Err(Error::input("annulus width must be at least 1"));
    }
    let x0 = space.basepoint();
    let count = (space.eccentricity(x0) / width) as usize + 1;
    let mut parts = vec![Vec::new(); count];
    for x in 0..space.len() {
        parts[(space.dist(x0, x) / width) as usize].push(x);
    }
    while parts.last().is_some_and(Vec::is_empty) {
        parts.pop();
    }
    Ok(AnnularDecomposition {
        width,
        basepoint: x0,
        parts,
    })
}

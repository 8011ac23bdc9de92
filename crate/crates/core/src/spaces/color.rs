//! Multiplicity of covers and the annulus-by-annulus greedy colouring.
//!
//! The space is cut into annuli of width `max(2r, 1)` around the basepoint.
//! Annuli of equal parity that are not adjacent are more than `r` apart, so
//! even and odd annuli get disjoint palettes and are coloured independently.
//! Inside an annulus we take a maximal `2r`-separated net (ascending point
//! order), group members by the first net ball `B_{2r}(y_j)` they meet, and
//! colour first-fit in that order, checking conflicts against true distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::geometry::annular_decomposition;
use crate::spaces::{Cover, Dist, FiniteSpace};

/// `min_{u in set} d(x, u)` for every point `x`.
fn distance_to_set(space: &FiniteSpace, set: &[usize]) -> Vec<Dist> {
    (0..space.len())
        .map(|x| set.iter().map(|&u| space.dist(x, u)).min().unwrap_or(Dist::MAX))
        .collect()
}

/// Largest number of members meeting a single closed ball `B_r(x)`.
pub fn cover_multiplicity(space: &FiniteSpace, cover: &Cover, r: Dist) -> usize {
    multiplicity_of(space, &cover.members, r).0
}

/// Multiplicity together with a centre attaining it.
fn multiplicity_of(space: &FiniteSpace, members: &[Vec<usize>], r: Dist) -> (usize, usize) {
    let mut counts = vec![0usize; space.len()];
    for m in members {
        for (x, d) in distance_to_set(space, m).into_iter().enumerate() {
            if d <= r {
                counts[x] += 1;
            }
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(x, &c)| (c, x))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .unwrap_or((0, 0))
}

/// A cover whose members each lie inside one annulus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnularCover {
    pub width: Dist,
    pub members: Vec<Vec<usize>>,
    pub annulus_of: Vec<usize>,
}

impl AnnularCover {
    /// Cuts every member of `cover` along the annuli of width `max(2r, 1)`;
    /// empty pieces are dropped.
    pub fn from_cover(space: &FiniteSpace, cover: &Cover, r: Dist) -> Result<Self> {
        let width = (2 * r).max(1);
        let ann = annular_decomposition(space, width)?;
        let mut members = Vec::new();
        let mut annulus_of = Vec::new();
        for (k, part) in ann.parts.iter().enumerate() {
            for m in &cover.members {
                let piece: Vec<usize> = m.iter().copied().filter(|x| part.binary_search(x).is_ok()).collect();
                if !piece.is_empty() {
                    members.push(piece);
                    annulus_of.push(k);
                }
            }
        }
        Ok(Self {
            width,
            members,
            annulus_of,
        })
    }

    pub fn annulus_count(&self) -> usize {
        self.annulus_of.iter().max().map_or(0, |&k| k + 1)
    }

    fn members_in(&self, k: usize) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.annulus_of[i] == k).collect()
    }

    /// Largest `2r`-multiplicity of any single annulus' member family.
    pub fn annulus_multiplicity(&self, space: &FiniteSpace, r: Dist) -> usize {
        (0..self.annulus_count())
            .map(|k| {
                let ms: Vec<Vec<usize>> = self.members_in(k).into_iter().map(|i| self.members[i].clone()).collect();
                multiplicity_of(space, &ms, 2 * r).0
            })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub color_of: Vec<usize>,
    pub color_count: usize,
    pub gap: Dist,
}

impl Coloring {
    /// First pair of distinct same-colour members at distance `<= gap`.
    pub fn first_conflict(&self, space: &FiniteSpace, members: &[Vec<usize>]) -> Option<(usize, usize)> {
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                if self.color_of[i] == self.color_of[j]
                    && space.set_distance(&members[i], &members[j]).is_some_and(|d| d <= self.gap)
                {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringReport {
    pub coloring: Coloring,
    /// Multiplicity bound supplied by the caller.
    pub k: usize,
    /// Largest net-ball family `|E_j|` seen.
    pub max_family: usize,
    pub net_sizes: Vec<usize>,
    pub bound_2k: usize,
    pub bound_2k_plus_2: usize,
    pub within_2k: bool,
    pub within_2k_plus_2: bool,
    /// Largest member diameter. When it is at most `r`, first-fit needs at
    /// most `k` colours per parity.
    pub max_member_diameter: Dist,
}

/// Greedy colouring of an annular cover; same-coloured members end up more
/// than `r` apart. Errors if some net ball `B_{2r}(y_j)` meets more than
/// `k + 1` members of its annulus.
pub fn greedy_color_cover(space: &FiniteSpace, cover: &AnnularCover, r: Dist, k: usize) -> Result<ColoringReport> {
    if cover.width != (2 * r).max(1) {
        return Err(Error::pre(format!(
            "annulus width {} does not match 2r = {}",
            cover.width,
            (2 * r).max(1)
        )));
    }
    let separation = (2 * r).max(1);
    let n_members = cover.members.len();
    let dist_to: Vec<Vec<Dist>> = cover.members.iter().map(|m| distance_to_set(space, m)).collect();
    let mut color_of = vec![usize::MAX; n_members];
    // Local colour index per parity, mapped later to disjoint palettes.
    let mut local = vec![usize::MAX; n_members];
    let mut used_per_parity = [0usize; 2];
    let mut net_sizes = Vec::new();
    let mut max_family = 0;

    let ann = annular_decomposition(space, cover.width)?;
    for k_ann in 0..cover.annulus_count() {
        let ids = cover.members_in(k_ann);
        let region: &[usize] = ann.parts.get(k_ann).map_or(&[], Vec::as_slice);
        let mut net: Vec<usize> = Vec::new();
        for &x in region {
            if net.iter().all(|&y| space.dist(x, y) >= separation) {
                net.push(x);
            }
        }
        net_sizes.push(net.len());

        let mut order: Vec<usize> = Vec::with_capacity(ids.len());
        let mut placed = vec![false; n_members];
        for &y in &net {
            let family: Vec<usize> = ids.iter().copied().filter(|&i| dist_to[i][y] <= 2 * r).collect();
            max_family = max_family.max(family.len());
            if family.len() > k + 1 {
                return Err(Error::pre(format!(
                    "multiplicity bound k = {k} violated: ball B_{}({y}) meets {} members",
                    2 * r,
                    family.len()
                )));
            }
            for i in family {
                if !placed[i] {
                    placed[i] = true;
                    order.push(i);
                }
            }
        }
        // Members with no point in the annulus region cannot occur, but keep
        // the colouring total regardless.
        order.extend(ids.iter().copied().filter(|&i| !placed[i]));

        for &i in &order {
            let mut taken: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&j| j != i && local[j] != usize::MAX)
                .filter(|&j| cover.members[j].iter().any(|&v| dist_to[i][v] <= r))
                .map(|j| local[j])
                .collect();
            taken.sort_unstable();
            taken.dedup();
            let c = (0..).find(|c| taken.binary_search(c).is_err()).unwrap_or(0);
            local[i] = c;
            let p = k_ann % 2;
            used_per_parity[p] = used_per_parity[p].max(c + 1);
        }
    }
    for i in 0..n_members {
        let p = cover.annulus_of[i] % 2;
        color_of[i] = if p == 0 { local[i] } else { used_per_parity[0] + local[i] };
    }
    let color_count = used_per_parity[0] + used_per_parity[1];
    let max_member_diameter = cover.members.iter().map(|m| space.set_diameter(m)).max().unwrap_or(0);
    Ok(ColoringReport {
        coloring: Coloring {
            color_of,
            color_count,
            gap: r,
        },
        k,
        max_family,
        net_sizes,
        bound_2k: 2 * k,
        bound_2k_plus_2: 2 * (k + 1),
        within_2k: color_count <= 2 * k,
        within_2k_plus_2: color_count <= 2 * (k + 1),
        max_member_diameter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arcs(n: usize, len: usize, step: usize) -> Vec<Vec<usize>> {
        (0..n).step_by(step).map(|s| (0..len).map(|i| (s + i) % n).collect()).collect()
    }

    #[test]
    fn multiplicity_examples() {
        let p = FiniteSpace::path(10);
        let singles = Cover::new(&p, (0..10).map(|i| vec![i]).collect()).unwrap();
        assert_eq!(cover_multiplicity(&p, &singles, 0), 1);
        let three = Cover::new(&p, vec![(0..5).collect(), (3..8).collect(), (6..10).collect()]).unwrap();
        // Direct enumeration: point 4 sees the first two sets within 1; point 5
        // sees members 0 (via 4), 1 and 2 (via 6).
        let oracle = (0..10)
            .map(|x| {
                three
                    .members
                    .iter()
                    .filter(|m| m.iter().any(|&u| p.dist(x, u) <= 1))
                    .count()
            })
            .max()
            .unwrap();
        assert_eq!(cover_multiplicity(&p, &three, 1), oracle);
        assert_eq!(cover_multiplicity(&p, &Cover::trivial(&p), 4), 1);
    }

    #[test]
    fn forty_cycle_by_arcs() {
        let c = FiniteSpace::cycle(40);
        // Eight arcs of six points, consecutive arcs sharing one point.
        let members: Vec<Vec<usize>> = (0..8).map(|j| (0..6).map(|i| (5 * j + i) % 40).collect()).collect();
        let cover = Cover::new(&c, members).unwrap();
        let r = 1;
        let ac = AnnularCover::from_cover(&c, &cover, r).unwrap();
        let k = ac.annulus_multiplicity(&c, r);
        let rep = greedy_color_cover(&c, &ac, r, k).unwrap();
        assert!(rep.within_2k_plus_2);
        assert_eq!(rep.coloring.first_conflict(&c, &ac.members), None);
    }

    #[test]
    fn disjoint_and_single_member() {
        let c = FiniteSpace::cycle(30);
        let cover = Cover::new(&c, arcs(30, 1, 1)).unwrap();
        let ac = AnnularCover::from_cover(&c, &cover, 0).unwrap();
        let rep = greedy_color_cover(&c, &ac, 0, 1).unwrap();
        assert!(rep.coloring.color_count <= 2);
        assert_eq!(rep.coloring.first_conflict(&c, &ac.members), None);

        let p = FiniteSpace::path(1);
        let ac = AnnularCover::from_cover(&p, &Cover::trivial(&p), 2).unwrap();
        let rep = greedy_color_cover(&p, &ac, 2, 1).unwrap();
        assert_eq!(rep.coloring.color_count, 1);
    }

    #[test]
    fn multiplicity_violation_names_ball() {
        let c = FiniteSpace::cycle(20);
        let cover = Cover::new(&c, arcs(20, 4, 1)).unwrap();
        let ac = AnnularCover::from_cover(&c, &cover, 2).unwrap();
        let err = greedy_color_cover(&c, &ac, 2, 1).unwrap_err();
        assert!(err.to_string().contains("B_4("));
    }
}

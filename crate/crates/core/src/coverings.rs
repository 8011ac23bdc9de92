//! Covering maps, injectivity radii and box spaces.
//!
//! Infinite groups enter only through finite balls: a [`MarkedGroupBall`] is
//! the ball of radius `R_big` in a free group of rank `k` with its word
//! metric, and a quotient covering sends each reduced word to its value in a
//! finite marked group. Every divergence verdict computed here is evidence
//! over a finite window, never a proof.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::cayley::{CayleySpace, CyclicGroup, GroupLaw, MatrixModP, ProductGroup, TableGroup};
use crate::spaces::{Dist, FiniteSpace};

/// Largest ball we are willing to materialise (the distance table is dense).
pub const MAX_BALL_POINTS: usize = 3000;

/// Ball of radius `radius` in the free group on `rank` generators.
///
/// Letters are nonzero integers: `+(i+1)` is generator `i`, `-(i+1)` its
/// inverse. Words are reduced and listed by length, then lexicographically.
#[derive(Clone, Debug)]
pub struct MarkedGroupBall {
    rank: usize,
    radius: Dist,
    words: Vec<Vec<i32>>,
    index: HashMap<Vec<i32>, usize>,
    space: Arc<FiniteSpace>,
}

/// `1 + sum_{l=1}^{R} 2k (2k-1)^{l-1}`, or `1 + 2R` when `k = 1`.
pub fn free_ball_size(rank: usize, radius: Dist) -> usize {
    if rank == 0 {
        return 1;
    }
    let mut total = 1usize;
    let mut sphere = 2 * rank;
    for _ in 0..radius {
        total = total.saturating_add(sphere);
        sphere = sphere.saturating_mul(2 * rank - 1);
    }
    total
}

impl MarkedGroupBall {
    pub fn new(rank: usize, radius: Dist) -> Result<Self> {
        if rank == 0 {
            return Err(Error::input("free group rank must be at least 1"));
        }
        let size = free_ball_size(rank, radius);
        if size > MAX_BALL_POINTS {
            return Err(Error::input(format!(
                "free group ball of rank {rank} and radius {radius} has {size} points (limit {MAX_BALL_POINTS})"
            )));
        }
        let letters: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
        let mut words: Vec<Vec<i32>> = vec![Vec::new()];
        let mut edges = Vec::with_capacity(size);
        let mut frontier = vec![0usize];
        for _ in 0..radius {
            let mut next = Vec::new();
            for &w in &frontier {
                for &l in &letters {
                    if words[w].last() == Some(&-l) {
                        continue;
                    }
                    let mut nw = words[w].clone();
                    nw.push(l);
                    edges.push((w, words.len()));
                    next.push(words.len());
                    words.push(nw);
                }
            }
            frontier = next;
        }
        let space = FiniteSpace::from_edges(words.len(), &edges, 0)?;
        let index = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        Ok(Self {
            rank,
            radius,
            words,
            index,
            space: Arc::new(space),
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn radius(&self) -> Dist {
        self.radius
    }

    pub fn word(&self, x: usize) -> &[i32] {
        &self.words[x]
    }

    pub fn words(&self) -> &[Vec<i32>] {
        &self.words
    }

    /// Index of a word after free reduction, if it lies in the ball.
    pub fn find(&self, letters: &[i32]) -> Option<usize> {
        self.index.get(&free_reduce(letters)).copied()
    }

    pub fn arc_space(&self) -> Arc<FiniteSpace> {
        Arc::clone(&self.space)
    }
}

pub fn free_reduce(letters: &[i32]) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn free_inverse(letters: &[i32]) -> Vec<i32> {
    letters.iter().rev().map(|l| -l).collect()
}

impl GroupLaw for MarkedGroupBall {
    fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }
    fn identity(&self) -> usize {
        0
    }
    fn mul(&self, a: usize, b: usize) -> Option<usize> {
        let mut w = self.words[a].clone();
        w.extend_from_slice(&self.words[b]);
        self.find(&w)
    }
    fn inv(&self, a: usize) -> Option<usize> {
        self.find(&free_inverse(&self.words[a]))
    }
}

/// Which way the family arrow points: finite covers of a fixed target, or
/// maps out of a fixed source onto a sequence of targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Quotient,
    FixedSource,
}

/// Where `injectivity_radius` found the first failure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RadiusWitness {
    /// `d_source(u, v) != d_target(pi u, pi v)` inside `B_radius(centre)`.
    Distance {
        radius: Dist,
        centre: usize,
        u: usize,
        v: usize,
        source: Dist,
        target: Dist,
    },
    /// The image of `B_radius(centre)` misses `missing` in the target ball.
    NotOnto { radius: Dist, centre: usize, missing: usize },
}

#[derive(Clone, Debug)]
pub struct CoveringMap {
    source: Arc<FiniteSpace>,
    target: Arc<FiniteSpace>,
    point_map: Vec<usize>,
    /// Radius of the source ball when the source is a truncated group; centres
    /// are only admissible if their `R`-ball stays inside it.
    source_ball_radius: Option<Dist>,
    orientation: Orientation,
    deck: Option<Vec<Vec<usize>>>,
    source_group: Option<Arc<MarkedGroupBall>>,
    target_group: Option<Arc<CayleySpace>>,
    radius: Dist,
    radius_capped: bool,
    witness: Option<RadiusWitness>,
}

impl CoveringMap {
    /// Generic covering map; `point_map` must be onto. The injectivity radius
    /// is computed immediately.
    pub fn new(source: Arc<FiniteSpace>, target: Arc<FiniteSpace>, point_map: Vec<usize>) -> Result<Self> {
        Self::build(source, target, point_map, None, None, None)
    }

    fn build(
        source: Arc<FiniteSpace>,
        target: Arc<FiniteSpace>,
        point_map: Vec<usize>,
        source_ball_radius: Option<Dist>,
        source_group: Option<Arc<MarkedGroupBall>>,
        target_group: Option<Arc<CayleySpace>>,
    ) -> Result<Self> {
        if point_map.len() != source.len() {
            return Err(Error::input(format!(
                "point map has {} entries for {} source points",
                point_map.len(),
                source.len()
            )));
        }
        let mut hit = vec![false; target.len()];
        for &y in &point_map {
            if y >= target.len() {
                return Err(Error::input(format!("point map sends into {y}, outside the target")));
            }
            hit[y] = true;
        }
        if let Some(missed) = hit.iter().position(|&h| !h) {
            return Err(Error::input(format!(
                "point map is not onto: target point {missed} has no preimage (a larger source ball may be needed)"
            )));
        }
        let mut cov = Self {
            source,
            target,
            point_map,
            source_ball_radius,
            orientation: Orientation::Quotient,
            deck: None,
            source_group,
            target_group,
            radius: 0,
            radius_capped: false,
            witness: None,
        };
        let (radius, capped, witness) = compute_injectivity_radius(&cov);
        cov.radius = radius;
        cov.radius_capped = capped;
        cov.witness = witness;
        Ok(cov)
    }

    /// The identity map of a group ball onto itself.
    pub fn identity(ball: Arc<MarkedGroupBall>) -> Result<Self> {
        let space = ball.arc_space();
        let map = (0..space.len()).collect();
        let radius = ball.radius();
        Self::build(Arc::clone(&space), space, map, Some(radius), Some(ball), None)
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Attaches deck transformations (permutations of the source); each must
    /// be an isometry commuting with the projection.
    pub fn with_deck(mut self, deck: Vec<Vec<usize>>) -> Result<Self> {
        let n = self.source.len();
        for (i, g) in deck.iter().enumerate() {
            if g.len() != n {
                return Err(Error::input(format!("deck transformation {i} has wrong length")));
            }
            let mut seen = vec![false; n];
            for &x in g {
                if x >= n || std::mem::replace(&mut seen[x], true) {
                    return Err(Error::input(format!("deck transformation {i} is not a permutation")));
                }
            }
            for x in 0..n {
                if self.point_map[g[x]] != self.point_map[x] {
                    return Err(Error::input(format!("deck transformation {i} does not commute with the projection at {x}")));
                }
                for y in 0..n {
                    if self.source.dist(g[x], g[y]) != self.source.dist(x, y) {
                        return Err(Error::input(format!("deck transformation {i} is not an isometry")));
                    }
                }
            }
        }
        self.deck = Some(deck);
        Ok(self)
    }

    pub fn source(&self) -> &Arc<FiniteSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<FiniteSpace> {
        &self.target
    }

    pub fn map(&self, y: usize) -> usize {
        self.point_map[y]
    }

    pub fn point_map(&self) -> &[usize] {
        &self.point_map
    }

    pub fn source_ball_radius(&self) -> Option<Dist> {
        self.source_ball_radius
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn deck(&self) -> Option<&[Vec<usize>]> {
        self.deck.as_deref()
    }

    pub fn source_group(&self) -> Option<&Arc<MarkedGroupBall>> {
        self.source_group.as_ref()
    }

    pub fn target_group(&self) -> Option<&Arc<CayleySpace>> {
        self.target_group.as_ref()
    }

    /// Largest `R` for which every admissible `R`-ball maps isometrically
    /// onto the `R`-ball around its image.
    pub fn injectivity_radius(&self) -> Dist {
        self.radius
    }

    /// Whether the search stopped because no larger ball fits in the source
    /// (the true radius may then be larger).
    pub fn radius_capped(&self) -> bool {
        self.radius_capped
    }

    /// Failure at radius `injectivity_radius() + 1`, when one exists.
    pub fn witness(&self) -> Option<&RadiusWitness> {
        self.witness.as_ref()
    }

    /// Centres whose `radius`-ball lies inside the materialised source.
    pub fn admissible_centres(&self, radius: Dist) -> Vec<usize> {
        match self.source_ball_radius {
            Some(big) => {
                let x0 = self.source.basepoint();
                (0..self.source.len())
                    .filter(|&y| self.source.dist(x0, y) + radius <= big)
                    .collect()
            }
            None => (0..self.source.len()).collect(),
        }
    }

    /// Points `y` with `d(y, x0) + margin <= R_big` (all points for a generic
    /// source).
    pub fn interior(&self, margin: Dist) -> Vec<usize> {
        self.admissible_centres(margin)
    }

    /// First ball pair violating `pi(ab) = pi(a) pi(b)`, over all products
    /// that stay inside the source ball.
    pub fn homomorphism_defect(&self) -> Option<(usize, usize)> {
        let (ball, quot) = (self.source_group.as_ref()?, self.target_group.as_ref()?);
        for a in 0..ball.len() {
            for b in 0..ball.len() {
                if let Some(ab) = ball.mul(a, b) {
                    if self.map(ab) != quot.mul_idx(self.map(a), self.map(b)) {
                        return Some((a, b));
                    }
                }
            }
        }
        None
    }
}

fn check_radius(cov: &CoveringMap, radius: Dist, centres: &[usize]) -> Option<RadiusWitness> {
    let (s, t) = (&cov.source, &cov.target);
    for &c in centres {
        let ball = s.ball(c, radius);
        for (i, &u) in ball.iter().enumerate() {
            for &v in &ball[i + 1..] {
                let (ds, dt) = (s.dist(u, v), t.dist(cov.map(u), cov.map(v)));
                if ds != dt {
                    return Some(RadiusWitness::Distance {
                        radius,
                        centre: c,
                        u,
                        v,
                        source: ds,
                        target: dt,
                    });
                }
            }
        }
        // Distances are preserved, so the image is injective; onto iff the
        // sizes agree.
        let target_ball = t.ball(cov.map(c), radius);
        if target_ball.len() != ball.len() {
            let mut image: Vec<usize> = ball.iter().map(|&u| cov.map(u)).collect();
            image.sort_unstable();
            let missing = target_ball
                .iter()
                .copied()
                .find(|y| image.binary_search(y).is_err())
                .unwrap_or(cov.map(c));
            return Some(RadiusWitness::NotOnto { radius, centre: c, missing });
        }
    }
    None
}

fn compute_injectivity_radius(cov: &CoveringMap) -> (Dist, bool, Option<RadiusWitness>) {
    let cap = match cov.source_ball_radius {
        Some(big) => big,
        None => cov.source.diameter(),
    };
    let mut best = 0;
    for radius in 1..=cap {
        let centres = cov.admissible_centres(radius);
        if centres.is_empty() {
            return (best, true, None);
        }
        if let Some(w) = check_radius(cov, radius, &centres) {
            return (best, false, Some(w));
        }
        best = radius;
    }
    (best, true, None)
}

/// The quotient map from a free group ball to a finite marked group.
pub fn quotient_covering(ball: &Arc<MarkedGroupBall>, quotient: &Arc<CayleySpace>) -> Result<CoveringMap> {
    if quotient.marking().len() != ball.rank() {
        return Err(Error::input(format!(
            "quotient has {} generator images but the free group has rank {}",
            quotient.marking().len(),
            ball.rank()
        )));
    }
    let map = ball
        .words()
        .iter()
        .map(|w| quotient.eval_word(w))
        .collect::<Result<Vec<_>>>()?;
    CoveringMap::build(
        ball.arc_space(),
        quotient.arc_space(),
        map,
        Some(ball.radius()),
        Some(Arc::clone(ball)),
        Some(Arc::clone(quotient)),
    )
}

/// Injectivity radius of an already-built covering map.
pub fn injectivity_radius(cover: &CoveringMap) -> Dist {
    cover.injectivity_radius()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Increasing,
    NotIncreasing,
    InsufficientData,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaithfulnessTerm {
    pub m: usize,
    pub radius: Dist,
    pub capped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub terms: Vec<FaithfulnessTerm>,
    pub verdict: Verdict,
    pub evidence: String,
}

pub const WINDOW_EVIDENCE: &str = "window evidence over the computed range, not a proof of divergence";

/// Verdict on a finite sequence: increasing when, after the last place the
/// sequence fails to strictly rise, there remain at least two strictly
/// increasing terms.
pub fn window_verdict(values: &[u64]) -> Verdict {
    if values.len() < 2 {
        return Verdict::InsufficientData;
    }
    let start = (1..values.len())
        .rev()
        .find(|&i| values[i] <= values[i - 1])
        .unwrap_or(0);
    if values.len() - start >= 2 {
        Verdict::Increasing
    } else {
        Verdict::NotIncreasing
    }
}

pub fn faithfulness_report(family: &[CoveringMap]) -> Result<FaithfulnessReport> {
    if family.is_empty() {
        return Err(Error::input("covering family is empty"));
    }
    let terms: Vec<FaithfulnessTerm> = family
        .iter()
        .enumerate()
        .map(|(m, c)| FaithfulnessTerm {
            m,
            radius: c.injectivity_radius(),
            capped: c.radius_capped(),
        })
        .collect();
    let radii: Vec<u64> = terms.iter().map(|t| t.radius as u64).collect();
    Ok(FaithfulnessReport {
        verdict: window_verdict(&radii),
        terms,
        evidence: WINDOW_EVIDENCE.to_string(),
    })
}

/// Finitely many components of a box space. Component `j >= 1` sits at
/// distance `schedule[j-1]` from every earlier component, measured between
/// basepoints: `d(x, y) = d(x, x_i) + schedule[max(i,j)-1] + d(y_j, y)`.
#[derive(Clone, Debug)]
pub struct BoxSpace {
    pub components: Vec<FiniteSpace>,
    pub schedule: Vec<Dist>,
    pub offsets: Vec<usize>,
    pub space: FiniteSpace,
}

pub fn assemble_box_space(components: Vec<FiniteSpace>, schedule: Vec<Dist>) -> Result<BoxSpace> {
    if components.is_empty() {
        return Err(Error::input("box space needs at least one component"));
    }
    if schedule.len() + 1 < components.len() {
        return Err(Error::input(format!(
            "{} components need at least {} separation values, got {}",
            components.len(),
            components.len() - 1,
            schedule.len()
        )));
    }
    if schedule.first().is_some_and(|&s| s == 0) {
        return Err(Error::input("separations must be positive"));
    }
    if let Some(i) = (1..schedule.len()).find(|&i| schedule[i] <= schedule[i - 1]) {
        return Err(Error::input(format!(
            "separation schedule must be strictly increasing: {} then {}",
            schedule[i - 1],
            schedule[i]
        )));
    }
    let mut offsets = Vec::with_capacity(components.len());
    let mut owner = Vec::new();
    for (i, c) in components.iter().enumerate() {
        offsets.push(owner.len());
        owner.extend((0..c.len()).map(|x| (i, x)));
    }
    let n = owner.len();
    let table: Vec<Vec<Dist>> = (0..n)
        .map(|p| {
            let (i, x) = owner[p];
            (0..n)
                .map(|q| {
                    let (j, y) = owner[q];
                    if i == j {
                        components[i].dist(x, y)
                    } else {
                        let ex = components[i].dist(components[i].basepoint(), x);
                        let ey = components[j].dist(components[j].basepoint(), y);
                        ex + schedule[i.max(j) - 1] + ey
                    }
                })
                .collect()
        })
        .collect();
    let space = FiniteSpace::from_distance_table(table, 0)?;
    Ok(BoxSpace {
        components,
        schedule,
        offsets,
        space,
    })
}

impl BoxSpace {
    pub fn component_points(&self, i: usize) -> Vec<usize> {
        let start = self.offsets[i];
        (start..start + self.components[i].len()).collect()
    }

    /// Distance between components `i` and `j` as point sets.
    pub fn separation(&self, i: usize, j: usize) -> Dist {
        self.space
            .set_distance(&self.component_points(i), &self.component_points(j))
            .unwrap_or(0)
    }
}

/// JSON description of a finite marked quotient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuotientSpec {
    pub rank: usize,
    pub generator_images: Vec<serde_json::Value>,
    pub group: GroupSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum GroupSpec {
    Cyclic { n: u64 },
    Product { moduli: Vec<u64> },
    Table { table: Vec<Vec<usize>> },
    MatrixModP { p: u64 },
}

impl QuotientSpec {
    pub fn build(&self) -> Result<CayleySpace> {
        if self.generator_images.len() != self.rank {
            return Err(Error::input(format!(
                "{} generator images for rank {}",
                self.generator_images.len(),
                self.rank
            )));
        }
        let images = |what: &str| -> Result<Vec<serde_json::Value>> {
            if self.generator_images.is_empty() {
                return Err(Error::input(format!("{what}: no generator images")));
            }
            Ok(self.generator_images.clone())
        };
        match &self.group {
            GroupSpec::Cyclic { n } => {
                if *n == 0 {
                    return Err(Error::input("cyclic group order must be positive"));
                }
                let imgs: Vec<u64> = parse_images(images("cyclic")?)?;
                CayleySpace::marked(&CyclicGroup { n: *n }, &imgs.iter().map(|g| g % n).collect::<Vec<_>>())
            }
            GroupSpec::Product { moduli } => {
                if moduli.is_empty() || moduli.contains(&0) {
                    return Err(Error::input("product moduli must be positive"));
                }
                let imgs: Vec<Vec<u64>> = parse_images(images("product")?)?;
                if imgs.iter().any(|g| g.len() != moduli.len()) {
                    return Err(Error::input("product image has the wrong number of coordinates"));
                }
                let imgs: Vec<Vec<u64>> = imgs
                    .into_iter()
                    .map(|g| g.iter().zip(moduli).map(|(x, n)| x % n).collect())
                    .collect();
                CayleySpace::marked(&ProductGroup { moduli: moduli.clone() }, &imgs)
            }
            GroupSpec::Table { table } => {
                let g = TableGroup::new(table.clone())?;
                let imgs: Vec<usize> = parse_images(images("table")?)?;
                if imgs.iter().any(|&x| x >= table.len()) {
                    return Err(Error::input("table image out of range"));
                }
                CayleySpace::marked(&g, &imgs)
            }
            GroupSpec::MatrixModP { p } => {
                if *p < 2 {
                    return Err(Error::input("matrix modulus must be at least 2"));
                }
                let g = MatrixModP { p: *p };
                let raw: Vec<[i64; 4]> = parse_images(images("matrix")?)?;
                let imgs: Vec<[u64; 4]> = raw.into_iter().map(|m| g.reduce(m)).collect();
                if let Some(i) = imgs.iter().position(|m| !g.is_invertible(m)) {
                    return Err(Error::input(format!("matrix image {i} is not invertible mod {p}")));
                }
                CayleySpace::marked(&g, &imgs)
            }
        }
    }
}

fn parse_images<V: serde::de::DeserializeOwned>(values: Vec<serde_json::Value>) -> Result<Vec<V>> {
    values
        .into_iter()
        .map(|v| serde_json::from_value(v).map_err(Error::from))
        .collect()
}

pub fn load_quotient_json(text: &str) -> Result<CayleySpace> {
    let spec: QuotientSpec = serde_json::from_str(text)?;
    spec.build()
}

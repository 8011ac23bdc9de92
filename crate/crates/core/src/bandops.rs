//! Finite-propagation operators on a finite space and group-ring elements.
//!
//! A [`BandOperator`] is a complex matrix indexed by points of a space,
//! optionally amplified to `b x b` blocks (`M_b` of the algebra); block
//! `(i, j)` entry `(x, y)` sits at row `i*n + x`, column `j*n + y` and has
//! distance `d(x, y)`. Propagation is always recomputed exactly after every
//! operation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex;

use crate::coverings::CoveringMap;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_power, Matrix};
use crate::scalar::{czero, Real};
use crate::spaces::cayley::GroupLaw;
use crate::spaces::{Dist, FiniteSpace};

/// Below this dimension `operator_norm` cross-checks the power iteration
/// against a full eigendecomposition and returns the latter.
pub const FULL_CHECK_DIM: usize = 64;
pub const DEFAULT_MAX_ITER: usize = 200_000;

#[derive(Clone, Debug)]
pub struct BandOperator<T: Real> {
    space: Arc<FiniteSpace>,
    blocks: usize,
    matrix: Matrix<T>,
    propagation: Dist,
}

fn same_space(a: &Arc<FiniteSpace>, b: &Arc<FiniteSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl<T: Real> BandOperator<T> {
    pub fn new(space: Arc<FiniteSpace>, matrix: Matrix<T>) -> Result<Self> {
        Self::amplified(space, 1, matrix)
    }

    /// Operator on `blocks` copies of the space.
    pub fn amplified(space: Arc<FiniteSpace>, blocks: usize, matrix: Matrix<T>) -> Result<Self> {
        let dim = space.len() * blocks;
        if blocks == 0 || matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::input(format!(
                "matrix is {}x{}, expected {dim}x{dim} for {} points and {blocks} blocks",
                matrix.rows(),
                matrix.cols(),
                space.len()
            )));
        }
        let mut op = Self {
            space,
            blocks,
            matrix,
            propagation: 0,
        };
        op.propagation = op.compute_propagation(T::zero());
        Ok(op)
    }

    pub fn from_fn(space: Arc<FiniteSpace>, f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let n = space.len();
        Self::new(space, Matrix::from_fn(n, n, f)).expect("dimensions match")
    }

    pub fn identity(space: Arc<FiniteSpace>) -> Self {
        let n = space.len();
        Self::new(space, Matrix::identity(n)).expect("dimensions match")
    }

    pub fn zero(space: Arc<FiniteSpace>) -> Self {
        let n = space.len();
        Self::new(space, Matrix::zeros(n, n)).expect("dimensions match")
    }

    /// Distance-one adjacency operator.
    pub fn adjacency(space: Arc<FiniteSpace>) -> Self {
        let s = Arc::clone(&space);
        Self::from_fn(space, |x, y| {
            if s.dist(x, y) == 1 {
                Complex::new(T::one(), T::zero())
            } else {
                czero()
            }
        })
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.matrix[(row, col)]
    }

    /// Distance between the points underlying two (amplified) indices.
    pub fn index_dist(&self, row: usize, col: usize) -> Dist {
        let n = self.space.len();
        self.space.dist(row % n, col % n)
    }

    /// Smallest `R` with every entry at distance `> R` equal to zero.
    pub fn propagation(&self) -> Dist {
        self.propagation
    }

    /// Propagation ignoring entries of modulus at most `tol`.
    pub fn propagation_at(&self, tol: T) -> Dist {
        self.compute_propagation(tol)
    }

    fn compute_propagation(&self, tol: T) -> Dist {
        let dim = self.dim();
        let mut p = 0;
        for i in 0..dim {
            for (j, x) in self.matrix.row(i).iter().enumerate() {
                if x.norm() > tol {
                    p = p.max(self.index_dist(i, j));
                }
            }
        }
        p
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if !same_space(&self.space, &other.space) || self.blocks != other.blocks {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    fn with_matrix(&self, matrix: Matrix<T>) -> Self {
        Self::amplified(Arc::clone(&self.space), self.blocks, matrix).expect("shape preserved")
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_matrix(self.matrix.matmul(&other.matrix)))
    }

    /// `alpha * self + beta * other`.
    pub fn add_scale(alpha: Complex<T>, s: &Self, beta: Complex<T>, t: &Self) -> Result<Self> {
        s.check_compatible(t)?;
        Ok(s.with_matrix(s.matrix.combine(alpha, &t.matrix, beta)))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_matrix(self.matrix.add(&other.matrix)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_matrix(self.matrix.sub(&other.matrix)))
    }

    pub fn scale(&self, alpha: Complex<T>) -> Self {
        self.with_matrix(self.matrix.scale(alpha))
    }

    pub fn adjoint(&self) -> Self {
        self.with_matrix(self.matrix.adjoint())
    }

    /// Identity of the same amplification.
    pub fn unit_like(&self) -> Self {
        self.with_matrix(Matrix::identity(self.dim()))
    }

    /// Largest singular value to relative tolerance `tol` in `(0, 1e-6]`.
    pub fn operator_norm(&self, tol: T) -> Result<T> {
        self.operator_norm_with(tol, DEFAULT_MAX_ITER)
    }

    pub fn operator_norm_with(&self, tol: T, max_iter: usize) -> Result<T> {
        if !(tol > T::zero() && tol <= T::lit(1e-6)) {
            return Err(Error::input(format!("norm tolerance {tol} outside (0, 1e-6]")));
        }
        if self.dim() <= FULL_CHECK_DIM {
            let power = spectral_norm_power(&self.matrix, tol, max_iter.min(5_000));
            let full = self.matrix.spectral_norm_full()?;
            if let Ok(p) = power {
                debug_assert!((p.value - full).abs() <= T::lit(1e-6) * full.max(T::one()));
            }
            return Ok(full);
        }
        spectral_norm_power(&self.matrix, tol, max_iter).map(|p| p.value)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        Ok(self.matrix.max_abs_diff(&other.matrix))
    }

    /// Block `(i, j)` of an amplified operator, as an operator on the space.
    pub fn block(&self, i: usize, j: usize) -> Self {
        let n = self.space.len();
        let m = Matrix::from_fn(n, n, |x, y| self.matrix[(i * n + x, j * n + y)]);
        Self::new(Arc::clone(&self.space), m).expect("square block")
    }

    /// Block matrix from a square grid of unamplified operators.
    pub fn from_blocks(grid: &[Vec<Self>]) -> Result<Self> {
        let b = grid.len();
        let first = grid.first().and_then(|r| r.first()).ok_or_else(|| Error::input("empty block grid"))?;
        for row in grid {
            if row.len() != b {
                return Err(Error::input("block grid is not square"));
            }
            for op in row {
                first.check_compatible(op)?;
                if op.blocks != 1 {
                    return Err(Error::input("blocks must be unamplified"));
                }
            }
        }
        let mats: Vec<Vec<Matrix<T>>> = grid.iter().map(|r| r.iter().map(|o| o.matrix.clone()).collect()).collect();
        Self::amplified(Arc::clone(&first.space), b, Matrix::from_blocks(&mats))
    }

    /// `diag(self, 0, ..., 0)` with `extra` zero blocks appended.
    pub fn corner_embed(&self, extra: usize) -> Self {
        let d = self.dim();
        let big = d + extra * self.space.len();
        let m = Matrix::from_fn(big, big, |i, j| if i < d && j < d { self.matrix[(i, j)] } else { czero() });
        Self::amplified(Arc::clone(&self.space), self.blocks + extra, m).expect("shape")
    }

    /// Coordinate-list text: a header naming the space hash, dimensions and
    /// propagation, then one `row col re im` line per nonzero entry.
    pub fn to_coo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# coarsekit operator");
        let _ = writeln!(out, "# space {}", self.space.content_hash());
        let _ = writeln!(out, "# points {}", self.space.len());
        let _ = writeln!(out, "# blocks {}", self.blocks);
        let _ = writeln!(out, "# propagation {}", self.propagation);
        for i in 0..self.dim() {
            for (j, x) in self.matrix.row(i).iter().enumerate() {
                if x.re != T::zero() || x.im != T::zero() {
                    let _ = writeln!(
                        out,
                        "{i} {j} {:e} {:e}",
                        x.re.to_f64_lossy(),
                        x.im.to_f64_lossy()
                    );
                }
            }
        }
        out
    }

    pub fn from_coo(space: Arc<FiniteSpace>, text: &str) -> Result<Self> {
        let mut blocks = 1usize;
        let mut declared_prop = None;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("space"), Some(h)) if h != space.content_hash() => {
                        return Err(Error::input(format!(
                            "operator file is for space {h}, not {}",
                            space.content_hash()
                        )));
                    }
                    (Some("points"), Some(p)) if p.parse::<usize>().ok() != Some(space.len()) => {
                        return Err(Error::input(format!("operator file has {p} points, space has {}", space.len())));
                    }
                    (Some("blocks"), Some(b)) => {
                        blocks = b.parse().map_err(|_| Error::input(format!("bad block count {b}")))?;
                    }
                    (Some("propagation"), Some(p)) => {
                        declared_prop =
                            Some(p.parse::<Dist>().map_err(|_| Error::input(format!("bad propagation {p}")))?);
                    }
                    _ => {}
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::input(format!("malformed operator line {}: {line}", lineno + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let i: usize = f[0].parse().map_err(|_| bad())?;
            let j: usize = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            entries.push((i, j, Complex::new(T::lit(re), T::lit(im))));
        }
        let dim = space.len() * blocks;
        let mut m = Matrix::zeros(dim, dim);
        for (i, j, x) in entries {
            if i >= dim || j >= dim {
                return Err(Error::input(format!("entry ({i},{j}) out of range for dimension {dim}")));
            }
            m[(i, j)] = x;
        }
        let op = Self::amplified(space, blocks, m)?;
        if let Some(p) = declared_prop {
            if p != op.propagation {
                return Err(Error::input(format!(
                    "declared propagation {p} differs from computed {}",
                    op.propagation
                )));
            }
        }
        Ok(op)
    }
}

/// Free function form of [`BandOperator::propagation`].
pub fn propagation_of<T: Real>(t: &BandOperator<T>) -> Dist {
    t.propagation()
}

/// Finitely supported coefficients on the elements of a group (indices into
/// a [`GroupLaw`]).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRingElement<T: Real> {
    coeffs: BTreeMap<usize, Complex<T>>,
    support_radius: Dist,
    group_order: usize,
}

impl<T: Real> GroupRingElement<T> {
    /// Zero coefficients are dropped; repeated keys are summed.
    pub fn new<G: GroupLaw + ?Sized>(group: &G, terms: impl IntoIterator<Item = (usize, Complex<T>)>) -> Result<Self> {
        let mut coeffs: BTreeMap<usize, Complex<T>> = BTreeMap::new();
        for (g, c) in terms {
            if g >= group.len() {
                return Err(Error::input(format!("group element {g} out of range")));
            }
            let e = coeffs.entry(g).or_insert_with(czero);
            *e = *e + c;
        }
        coeffs.retain(|_, c| c.re != T::zero() || c.im != T::zero());
        let support_radius = coeffs.keys().map(|&g| group.length(g)).max().unwrap_or(0);
        Ok(Self {
            coeffs,
            support_radius,
            group_order: group.len(),
        })
    }

    pub fn delta<G: GroupLaw + ?Sized>(group: &G, g: usize) -> Result<Self> {
        Self::new(group, [(g, Complex::new(T::one(), T::zero()))])
    }

    pub fn support_radius(&self) -> Dist {
        self.support_radius
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, Complex<T>> {
        &self.coeffs
    }

    pub fn coeff(&self, g: usize) -> Complex<T> {
        self.coeffs.get(&g).copied().unwrap_or_else(czero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Number of elements of the group the coefficients are indexed by.
    pub fn group_order(&self) -> usize {
        self.group_order
    }

    fn check_group<G: GroupLaw + ?Sized>(&self, group: &G) -> Result<()> {
        if group.len() != self.group_order {
            return Err(Error::input(format!(
                "element lives on a group of {} elements, not {}",
                self.group_order,
                group.len()
            )));
        }
        Ok(())
    }

    /// `l^2` norm of the coefficients.
    pub fn l2_norm(&self) -> T {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<T>().sqrt()
    }

    /// Convolution product; errors if a product leaves a truncated group.
    pub fn convolve<G: GroupLaw + ?Sized>(&self, other: &Self, group: &G) -> Result<Self> {
        self.check_group(group)?;
        other.check_group(group)?;
        let mut terms = Vec::new();
        for (&s, &a) in &self.coeffs {
            for (&t, &b) in &other.coeffs {
                let st = group
                    .mul(s, t)
                    .ok_or_else(|| Error::pre(format!("product of elements {s} and {t} leaves the group ball")))?;
                terms.push((st, a * b));
            }
        }
        Self::new(group, terms)
    }

    /// Coefficientwise image under a group covering: `pi(a)_h = sum a_g` over
    /// `pi(g) = h`. Two support elements with the same image are rejected.
    pub fn push_forward(&self, cover: &CoveringMap) -> Result<Self> {
        let (ball, quot) = match (cover.source_group(), cover.target_group()) {
            (Some(b), Some(q)) => (b, q),
            _ => return Err(Error::pre("push-forward needs a group covering")),
        };
        self.check_group(ball.as_ref())?;
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        for &g in self.coeffs.keys() {
            if let Some(prev) = seen.insert(cover.map(g), g) {
                return Err(Error::pre(format!(
                    "support elements {prev} and {g} have the same image (wraparound aliasing)"
                )));
            }
        }
        Self::new(quot.as_ref(), self.coeffs.iter().map(|(&g, &c)| (cover.map(g), c)))
    }

    /// Right-convolution operator `T_{x,y} = a_{x^{-1} y}` on the group's
    /// space; on a truncated ball entries whose product leaves the ball are
    /// dropped.
    pub fn to_band_operator<G: GroupLaw + ?Sized>(&self, group: &G) -> Result<BandOperator<T>> {
        self.check_group(group)?;
        let space = Arc::clone(group.space());
        let n = space.len();
        let mut m = Matrix::zeros(n, n);
        for x in 0..n {
            for (&s, &a) in &self.coeffs {
                if let Some(y) = group.mul(x, s) {
                    m[(x, y)] = a;
                }
            }
        }
        BandOperator::new(space, m)
    }

    /// Points `y` for which every `y s^{-1}`, `s` in the support, exists in
    /// the group. On these columns a truncated ball's operator agrees with
    /// the operator on the whole group.
    pub fn complete_columns<G: GroupLaw + ?Sized>(&self, group: &G) -> Result<Vec<usize>> {
        self.check_group(group)?;
        let invs: Option<Vec<usize>> = self.coeffs.keys().map(|&s| group.inv(s)).collect();
        let Some(invs) = invs else {
            return Ok(Vec::new());
        };
        Ok((0..group.len())
            .filter(|&y| invs.iter().all(|&si| group.mul(y, si).is_some()))
            .collect())
    }

    /// Pushes an element of the source ball down a group covering and
    /// realises it there. The support must fit inside the target diameter.
    pub fn realize_on(&self, cover: &CoveringMap) -> Result<BandOperator<T>> {
        let diam = cover.target().diameter();
        if self.support_radius > diam {
            return Err(Error::SupportTooLarge {
                support: self.support_radius,
                limit: diam,
                limit_name: "target diameter",
            });
        }
        let pushed = self.push_forward(cover)?;
        let quot = cover.target_group().expect("checked by push_forward");
        pushed.to_band_operator(quot.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverings::{quotient_covering, MarkedGroupBall};
    use crate::scalar::creal;
    use crate::spaces::cayley::cyclic;

    fn c12() -> Arc<crate::spaces::CayleySpace> {
        Arc::new(cyclic(12).unwrap())
    }

    #[test]
    fn delta_identity_is_identity() {
        let g = c12();
        let t = GroupRingElement::<f64>::delta(g.as_ref(), 0).unwrap().to_band_operator(g.as_ref()).unwrap();
        assert_eq!(t.matrix().max_abs_diff(&Matrix::identity(12)), 0.0);
        assert_eq!(t.propagation(), 0);
    }

    #[test]
    fn generator_plus_inverse_is_adjacency() {
        let g = c12();
        let gen = g.marking()[0];
        let a = GroupRingElement::<f64>::new(g.as_ref(), [(gen, creal(1.0)), (g.inv_idx(gen), creal(1.0))]).unwrap();
        let t = a.to_band_operator(g.as_ref()).unwrap();
        let adj = BandOperator::<f64>::adjacency(g.arc_space());
        assert_eq!(t.max_abs_diff(&adj).unwrap(), 0.0);
        assert_eq!(t.propagation(), 1);
        assert_eq!(a.support_radius(), 1);
    }

    #[test]
    fn support_beyond_diameter_rejected() {
        let ball = Arc::new(MarkedGroupBall::new(1, 12).unwrap());
        let cov = quotient_covering(&ball, &c12()).unwrap();
        let seven = ball.find(&[1; 7]).unwrap();
        let a = GroupRingElement::<f64>::delta(ball.as_ref(), seven).unwrap();
        assert!(matches!(a.realize_on(&cov), Err(Error::SupportTooLarge { support: 7, limit: 6, .. })));
        let six = GroupRingElement::<f64>::new(
            ball.as_ref(),
            [(ball.find(&[1; 6]).unwrap(), creal(1.0)), (ball.find(&[-1; 6]).unwrap(), creal(1.0))],
        )
        .unwrap();
        assert!(six.realize_on(&cov).is_err());
    }

    #[test]
    fn propagation_and_products() {
        let s = Arc::new(FiniteSpace::cycle(12));
        let id = BandOperator::<f64>::identity(Arc::clone(&s));
        let adj = BandOperator::<f64>::adjacency(Arc::clone(&s));
        assert_eq!(id.propagation(), 0);
        assert_eq!(adj.propagation(), 1);
        let sq = adj.multiply(&adj).unwrap();
        assert_eq!(sq.propagation(), 2);
        for x in 0..12 {
            for y in 0..12 {
                let want = match s.dist(x, y) {
                    0 => 2.0,
                    2 => 1.0,
                    _ => 0.0,
                };
                assert_eq!(sq.entry(x, y), creal(want));
            }
        }
        assert_eq!(id.multiply(&adj).unwrap().max_abs_diff(&adj).unwrap(), 0.0);
        let z = BandOperator::add_scale(creal(1.0), &adj, creal(-1.0), &adj).unwrap();
        assert_eq!(z.propagation(), 0);
        assert_eq!(z.matrix().max_abs(), 0.0);
        assert_eq!(adj.add(&id).unwrap().propagation(), 1);
        let other = BandOperator::<f64>::identity(Arc::new(FiniteSpace::path(12)));
        assert!(matches!(adj.multiply(&other), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn norms() {
        let s = Arc::new(FiniteSpace::cycle(30));
        assert!((BandOperator::<f64>::identity(Arc::clone(&s)).operator_norm(1e-10).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(BandOperator::<f64>::zero(Arc::clone(&s)).operator_norm(1e-10).unwrap(), 0.0);
        let big = Arc::new(FiniteSpace::cycle(100));
        let n = BandOperator::<f64>::adjacency(big).operator_norm(1e-10).unwrap();
        assert!((n - 2.0).abs() < 1e-9);
        assert!(BandOperator::<f64>::identity(s).operator_norm(1e-3).is_err());
    }

    #[test]
    fn coo_round_trip() {
        let s = Arc::new(FiniteSpace::cycle(6));
        let t = BandOperator::<f64>::from_fn(Arc::clone(&s), |x, y| {
            if s.dist(x, y) <= 2 {
                Complex::new(x as f64 + 0.25, -(y as f64))
            } else {
                czero()
            }
        });
        let text = t.to_coo();
        assert!(text.contains(&format!("# space {}", s.content_hash())));
        let back = BandOperator::<f64>::from_coo(Arc::clone(&s), &text).unwrap();
        assert_eq!(back.max_abs_diff(&t).unwrap(), 0.0);
        assert_eq!(back.propagation(), 2);
        assert!(BandOperator::<f64>::from_coo(Arc::new(FiniteSpace::path(6)), &text).is_err());
    }

    #[test]
    fn blocks_and_corners() {
        let s = Arc::new(FiniteSpace::cycle(5));
        let adj = BandOperator::<f64>::adjacency(Arc::clone(&s));
        let id = BandOperator::<f64>::identity(Arc::clone(&s));
        let m = BandOperator::from_blocks(&[vec![adj.clone(), id.clone()], vec![id.clone(), adj.clone()]]).unwrap();
        assert_eq!(m.blocks(), 2);
        assert_eq!(m.propagation(), 1);
        assert_eq!(m.block(0, 1).max_abs_diff(&id).unwrap(), 0.0);
        let c = adj.corner_embed(1);
        assert_eq!(c.block(0, 0).max_abs_diff(&adj).unwrap(), 0.0);
        assert_eq!(c.block(1, 1).matrix().max_abs(), 0.0);
    }
}

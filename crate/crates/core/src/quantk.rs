//! Quasi-projections, quasi-unitaries, the index form of an operator, and
//! the bookkeeping around localisation paths and control oracles.
//!
//! Everything here certifies representatives and residuals. Nothing decides
//! homotopy classes.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::bandops::BandOperator;
use crate::coverings::Verdict;
use crate::error::{Error, Result};
use crate::lifting::{lift_operator, LiftWindow};
use crate::linalg::Matrix;
use crate::onl::divergence_verdict;
use crate::scalar::{czero, creal, Real};
use crate::spaces::{Cover, Dist, FiniteSpace};

/// Tolerance used for the exact parts of each definition (`p = p*`).
pub const EXACT_TOL: f64 = 1e-10;

/// Distance from `1/2` below which rounding refuses to pick a side.
pub const GAP_TOL: f64 = 1e-9;

/// A propagation scale and a tolerance `eps` in `(0, 1/4)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub r: Dist,
    pub eps: f64,
}

impl QuantParams {
    pub fn new(r: Dist, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.25) {
            return Err(Error::input(format!("eps = {eps} outside (0, 1/4)")));
        }
        Ok(Self { r, eps })
    }
}

fn norm_tol<T: Real>() -> T {
    if T::epsilon() > T::lit(1e-10) {
        T::lit(1e-6)
    } else {
        T::lit(1e-10)
    }
}

fn norm<T: Real>(op: &BandOperator<T>) -> Result<f64> {
    Ok(op.operator_norm(norm_tol())?.to_f64_lossy())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiProjectionReport {
    pub params: QuantParams,
    /// `||p - p*||`
    pub self_adjoint_residual: f64,
    /// `||p^2 - p||`
    pub idempotent_residual: f64,
    pub propagation: Dist,
    pub propagation_excess: Dist,
    pub passes: bool,
}

pub fn check_quasi_projection<T: Real>(p: &BandOperator<T>, params: QuantParams) -> Result<QuasiProjectionReport> {
    let sa = norm(&p.sub(&p.adjoint())?)?;
    let idem = norm(&p.multiply(p)?.sub(p)?)?;
    let prop = p.propagation();
    let excess = prop.saturating_sub(params.r);
    Ok(QuasiProjectionReport {
        params,
        self_adjoint_residual: sa,
        idempotent_residual: idem,
        propagation: prop,
        propagation_excess: excess,
        passes: sa <= EXACT_TOL && idem <= params.eps && excess == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiUnitaryReport {
    pub params: QuantParams,
    /// `||u u* - 1||`
    pub left_residual: f64,
    /// `||u* u - 1||`
    pub right_residual: f64,
    pub propagation: Dist,
    pub propagation_excess: Dist,
    pub passes: bool,
}

pub fn check_quasi_unitary<T: Real>(u: &BandOperator<T>, params: QuantParams) -> Result<QuasiUnitaryReport> {
    let one = u.unit_like();
    let ustar = u.adjoint();
    let left = norm(&u.multiply(&ustar)?.sub(&one)?)?;
    let right = norm(&ustar.multiply(u)?.sub(&one)?)?;
    let prop = u.propagation();
    let excess = prop.saturating_sub(params.r);
    Ok(QuasiUnitaryReport {
        params,
        left_residual: left,
        right_residual: right,
        propagation: prop,
        propagation_excess: excess,
        passes: left < params.eps && right < params.eps && excess == 0,
    })
}

#[derive(Clone, Debug)]
pub struct RoundedProjection<T: Real> {
    pub projection: BandOperator<T>,
    pub rank: usize,
    /// `||q - p||`
    pub distance: f64,
}

/// Spectral projection of `(p + p*)/2` onto the eigenvalues above `1/2`.
pub fn round_to_projection<T: Real>(p: &BandOperator<T>, params: QuantParams) -> Result<RoundedProjection<T>> {
    let check = check_quasi_projection(p, params)?;
    if !check.passes {
        return Err(Error::pre(format!(
            "not an ({}, {})-quasi-projection: residuals {} / {}, propagation {}",
            params.r, params.eps, check.self_adjoint_residual, check.idempotent_residual, check.propagation
        )));
    }
    let half = creal(T::lit(0.5));
    let h = p.matrix().combine(half, &p.matrix().adjoint(), half);
    let eig = h.hermitian_eigen()?;
    if let Some(v) = eig.values.iter().find(|v| (v.to_f64_lossy() - 0.5).abs() <= GAP_TOL) {
        return Err(Error::pre(format!("eigenvalue {v} too close to 1/2 to round")));
    }
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > T::lit(0.5)).collect();
    let dim = p.dim();
    let q = Matrix::from_fn(dim, dim, |i, j| {
        keep.iter()
            .fold(czero(), |acc, &k| acc + eig.vectors[(i, k)] * eig.vectors[(j, k)].conj())
    });
    let projection = BandOperator::amplified(Arc::clone(p.space()), p.blocks(), q)?;
    let distance = norm(&projection.sub(p)?)?;
    Ok(RoundedProjection {
        projection,
        rank: keep.len(),
        distance,
    })
}

/// Nonnegative weights `eta_i` on the points, one row per cover member,
/// supported in that member and summing to 1 at every point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub members: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

pub const POU_TOL: f64 = 1e-12;

impl PartitionOfUnity {
    pub fn new(space: &FiniteSpace, cover: &Cover, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.len();
        if weights.len() != cover.len() {
            return Err(Error::input("one weight row per cover member is required"));
        }
        for (i, (w, m)) in weights.iter().zip(&cover.members).enumerate() {
            if w.len() != n {
                return Err(Error::input(format!("weight row {i} has {} entries, expected {n}", w.len())));
            }
            for (x, &v) in w.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(Error::input(format!("weight eta_{i}({x}) = {v} is negative")));
                }
                if v > 0.0 && !m.contains(&x) {
                    return Err(Error::input(format!("eta_{i} is nonzero at {x}, outside its member")));
                }
            }
        }
        for x in 0..n {
            let s: f64 = weights.iter().map(|w| w[x]).sum();
            if (s - 1.0).abs() > POU_TOL {
                return Err(Error::input(format!("weights sum to {s} at point {x}")));
            }
        }
        Ok(Self {
            members: cover.members.clone(),
            weights,
        })
    }

    /// One member covering everything, weight 1.
    pub fn trivial(space: &FiniteSpace) -> Self {
        Self {
            members: vec![(0..space.len()).collect()],
            weights: vec![vec![1.0; space.len()]],
        }
    }

    /// `eta_i(x) = phi_i(x) / sum_j phi_j(x)` with `phi_i(x)` the distance
    /// from `x` to the complement of member `i`.
    pub fn subordinate(space: &FiniteSpace, cover: &Cover) -> Result<Self> {
        let n = space.len();
        let all: Vec<usize> = (0..n).collect();
        let bumps: Vec<Vec<f64>> = cover
            .members
            .iter()
            .map(|m| {
                let outside: Vec<usize> = all.iter().copied().filter(|x| !m.contains(x)).collect();
                (0..n)
                    .map(|x| {
                        if !m.contains(&x) {
                            0.0
                        } else if outside.is_empty() {
                            (space.diameter() + 1) as f64
                        } else {
                            space.set_distance(&[x], &outside).unwrap_or(0) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut weights = bumps.clone();
        for x in 0..n {
            let s: f64 = bumps.iter().map(|b| b[x]).sum();
            if s == 0.0 {
                return Err(Error::input(format!("point {x} is not covered")));
            }
            for w in weights.iter_mut() {
                w[x] /= s;
            }
        }
        Self::new(space, cover, weights)
    }

    /// `sum_i sqrt(eta_i(x) eta_i(y))`.
    pub fn overlap(&self, x: usize, y: usize) -> f64 {
        self.weights.iter().map(|w| (w[x] * w[y]).sqrt()).sum()
    }
}

/// `sum_i sqrt(eta_i) F sqrt(eta_i)`, entrywise `F_xy sum_i sqrt(eta_i(x) eta_i(y))`.
pub fn smooth_cycle<T: Real>(f: &BandOperator<T>, pou: &PartitionOfUnity) -> Result<BandOperator<T>> {
    let n = f.space().len();
    if pou.weights.iter().any(|w| w.len() != n) {
        return Err(Error::SpaceMismatch);
    }
    for x in 0..n {
        let s: f64 = pou.weights.iter().map(|w| w[x]).sum();
        if (s - 1.0).abs() > POU_TOL {
            return Err(Error::input(format!("partition weights sum to {s} at point {x}")));
        }
    }
    let dim = f.dim();
    let m = Matrix::from_fn(dim, dim, |i, j| {
        let e = f.entry(i, j);
        if e == czero() {
            e
        } else {
            e * creal(T::lit(pou.overlap(i % n, j % n)))
        }
    });
    BandOperator::amplified(Arc::clone(f.space()), f.blocks(), m)
}

#[derive(Clone, Debug)]
pub struct IndexForm<T: Real> {
    /// The `2 x 2` block operator; block `(i, j)` occupies amplified blocks
    /// `i*b..(i+1)*b` by `j*b..(j+1)*b` where `b` is `F`'s amplification.
    pub op: BandOperator<T>,
    pub block_propagations: [[Dist; 2]; 2],
}

/// ```text
/// [ FF* + (1 - FF*)FF*     F(1 - F*F) + (1 - F*F)F(1 - F*F) ]
/// [ (1 - F*F)F             1 - F*F                          ]
/// ```
pub fn index_form<T: Real>(f: &BandOperator<T>) -> Result<IndexForm<T>> {
    let one = f.unit_like();
    let fs = f.adjoint();
    let ffs = f.multiply(&fs)?;
    let fsf = fs.multiply(f)?;
    let a = ffs.add(&one.sub(&ffs)?.multiply(&ffs)?)?;
    let d = one.sub(&fsf)?;
    let b = f.multiply(&d)?.add(&d.multiply(f)?.multiply(&d)?)?;
    let c = d.multiply(f)?;
    let blocks = [[&a, &b], [&c, &d]];
    let props = blocks.map(|row| row.map(|x| x.propagation()));
    let mats: Vec<Vec<Matrix<T>>> = blocks
        .iter()
        .map(|row| row.iter().map(|x| x.matrix().clone()).collect())
        .collect();
    let op = BandOperator::amplified(Arc::clone(f.space()), 2 * f.blocks(), Matrix::from_blocks(&mats))?;
    Ok(IndexForm {
        op,
        block_propagations: props,
    })
}

/// `diag(1, 0)` at the amplification of `I(F)`.
pub fn unit_corner<T: Real>(f: &BandOperator<T>) -> BandOperator<T> {
    f.unit_like().corner_embed(f.blocks())
}

/// The index form of a scalar, `I(lambda)`, as a `2 x 2` matrix.
pub fn scalar_index_form(lambda: Complex<f64>) -> [[Complex<f64>; 2]; 2] {
    let one = Complex::new(1.0, 0.0);
    let p = lambda * lambda.conj();
    let d = one - p;
    [[p + d * p, lambda * d + d * lambda * d], [d * lambda, d]]
}

/// Evaluation to the scalars: the common row sum, which is the augmentation
/// on operators induced by group-ring elements. `None` when row sums differ.
pub fn scalar_evaluation<T: Real>(op: &BandOperator<T>) -> Option<Complex<f64>> {
    let sums: Vec<Complex<f64>> = (0..op.dim())
        .map(|i| {
            let s = op.matrix().row(i).iter().fold(czero::<T>(), |a, &b| a + b);
            Complex::new(s.re.to_f64_lossy(), s.im.to_f64_lossy())
        })
        .collect();
    let first = *sums.first()?;
    sums.iter().all(|s| (s - first).norm() <= 1e-9).then_some(first)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexReport {
    pub smoothed_propagation: Dist,
    pub block_propagations: [[Dist; 2]; 2],
    /// `(r', eps')`: the propagation of `I(F~)` and its idempotent residual.
    pub derived_scale: Dist,
    pub derived_eps: f64,
    pub check: QuasiProjectionReport,
    /// `||I(F~) - diag(1, 0)||`
    pub distance_from_unit_corner: f64,
    /// Eigenvalue counts of the Hermitian part of `I(F~) - diag(1, 0)` above
    /// `1/2` and below `-1/2`.
    pub signature: (usize, usize),
    /// Blockwise evaluation of `I(F)` to the scalars, when `F` has constant
    /// row sums.
    pub scalar_evaluation: Option<[[[f64; 2]; 2]; 2]>,
    pub evaluation_is_unit_corner: Option<bool>,
}

pub fn index_class_check<T: Real>(
    f: &BandOperator<T>,
    pou: &PartitionOfUnity,
    params: QuantParams,
) -> Result<IndexReport> {
    let smoothed = smooth_cycle(f, pou)?;
    let form = index_form(&smoothed)?;
    let check = check_quasi_projection(&form.op, params)?;
    let corner = unit_corner(&smoothed);
    let diff = form.op.sub(&corner)?;
    let distance = norm(&diff)?;
    let half = creal(T::lit(0.5));
    let herm = diff.matrix().combine(half, &diff.matrix().adjoint(), half).hermitian_eigen()?;
    let pos = herm.values.iter().filter(|v| v.to_f64_lossy() > 0.5).count();
    let neg = herm.values.iter().filter(|v| v.to_f64_lossy() < -0.5).count();

    let (scalar, matches) = if f.blocks() == 1 {
        match scalar_evaluation(f) {
            Some(_) => {
                let b = f.blocks();
                let mut ev = [[[0.0; 2]; 2]; 2];
                let mut ok = true;
                for i in 0..2 {
                    for j in 0..2 {
                        let blk = form.op.block(i * b, j * b);
                        let lam = blk.matrix().row(0).iter().fold(czero::<T>(), |a, &x| a + x);
                        ev[i][j] = [lam.re.to_f64_lossy(), lam.im.to_f64_lossy()];
                        let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                        ok &= (ev[i][j][0] - want).abs() <= 1e-9 && ev[i][j][1].abs() <= 1e-9;
                    }
                }
                (Some(ev), Some(ok))
            }
            None => (None, None),
        }
    } else {
        (None, None)
    };

    let mut prop = 0;
    for row in form.block_propagations {
        for p in row {
            prop = prop.max(p);
        }
    }
    Ok(IndexReport {
        smoothed_propagation: smoothed.propagation(),
        block_propagations: form.block_propagations,
        derived_scale: prop,
        derived_eps: check.idempotent_residual,
        check,
        distance_from_unit_corner: distance,
        signature: (pos, neg),
        scalar_evaluation: scalar,
        evaluation_is_unit_corner: matches,
    })
}

/// Sampled operator-valued path with nonincreasing propagation.
#[derive(Clone, Debug)]
pub struct LocalisationPath<T: Real> {
    times: Vec<f64>,
    ops: Vec<BandOperator<T>>,
    target_propagation: Dist,
}

impl<T: Real> LocalisationPath<T> {
    pub fn new(times: Vec<f64>, ops: Vec<BandOperator<T>>, target_propagation: Dist) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::input("path has no samples"));
        }
        if times.len() != ops.len() {
            return Err(Error::input("one operator per sample time is required"));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::input("sample times must be nonnegative and strictly increasing"));
        }
        for (j, w) in ops.windows(2).enumerate() {
            if **w[0].space() != **w[1].space() || w[0].blocks() != w[1].blocks() {
                return Err(Error::SpaceMismatch);
            }
            if w[1].propagation() > w[0].propagation() {
                return Err(Error::input(format!("propagation increases at sample {}", j + 1)));
            }
        }
        let last = ops.last().expect("nonempty").propagation();
        if last > target_propagation {
            return Err(Error::input(format!(
                "final propagation {last} exceeds the declared target {target_propagation}"
            )));
        }
        Ok(Self {
            times,
            ops,
            target_propagation,
        })
    }

    /// The path that is `op` at every time.
    pub fn constant(op: BandOperator<T>, times: Vec<f64>) -> Result<Self> {
        let p = op.propagation();
        let ops = vec![op; times.len()];
        Self::new(times, ops, p)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn ops(&self) -> &[BandOperator<T>] {
        &self.ops
    }

    pub fn target_propagation(&self) -> Dist {
        self.target_propagation
    }

    pub fn propagations(&self) -> Vec<Dist> {
        self.ops.iter().map(BandOperator::propagation).collect()
    }

    /// Maximum norm over the samples.
    pub fn sup_norm(&self) -> Result<f64> {
        self.ops.iter().try_fold(0.0f64, |m, op| Ok(m.max(norm(op)?)))
    }
}

/// The sample at time 0.
pub fn path_evaluate<T: Real>(path: &LocalisationPath<T>) -> Result<BandOperator<T>> {
    if path.times[0] != 0.0 {
        return Err(Error::pre(format!("first sample is at t = {}, not 0", path.times[0])));
    }
    Ok(path.ops[0].clone())
}

#[derive(Clone, Debug)]
pub struct LiftedPath<T: Real> {
    pub path: LocalisationPath<T>,
    pub source_sup_norm: f64,
    pub lifted_sup_norm: f64,
    pub continuity_constant: Option<f64>,
    /// `lifted <= c * source`, when a constant is supplied.
    pub bound_holds: Option<bool>,
    /// Entrywise gap between evaluating the lift and lifting the evaluation.
    pub square_residual: f64,
}

pub fn lift_path<T: Real>(
    path: &LocalisationPath<T>,
    window: &LiftWindow<'_>,
    continuity_constant: Option<f64>,
) -> Result<LiftedPath<T>> {
    let mut ops = Vec::with_capacity(path.ops.len());
    for (j, op) in path.ops.iter().enumerate() {
        if op.propagation() > window.radius() {
            return Err(Error::pre(format!(
                "sample {j}: propagation {} exceeds the window {}",
                op.propagation(),
                window.radius()
            )));
        }
        ops.push(lift_operator(op, window)?);
    }
    let lifted = LocalisationPath::new(path.times.clone(), ops, path.target_propagation)?;
    let source_sup_norm = path.sup_norm()?;
    let lifted_sup_norm = lifted.sup_norm()?;
    let square_residual = match path_evaluate(path) {
        Ok(ev) => path_evaluate(&lifted)?
            .max_abs_diff(&lift_operator(&ev, window)?)?
            .to_f64_lossy(),
        Err(_) => 0.0,
    };
    Ok(LiftedPath {
        bound_holds: continuity_constant.map(|c| lifted_sup_norm <= c * source_sup_norm * (1.0 + 1e-9)),
        path: lifted,
        source_sup_norm,
        lifted_sup_norm,
        continuity_constant,
        square_residual,
    })
}

/// A linear map between graded pieces, compared on a subset of rows.
pub trait GradedMap<T: Real> {
    fn apply(&self, a: &BandOperator<T>) -> Result<BandOperator<T>>;

    /// Rows on which `f(ab)` and `f(a) f(b)` are compared; all rows if `None`.
    fn compared_rows(&self) -> Option<Vec<usize>> {
        None
    }
}

/// Wraps a closure as a [`GradedMap`].
pub struct MapFn<F>(pub F);

impl<T: Real, F: Fn(&BandOperator<T>) -> Result<BandOperator<T>>> GradedMap<T> for MapFn<F> {
    fn apply(&self, a: &BandOperator<T>) -> Result<BandOperator<T>> {
        (self.0)(a)
    }
}

impl<T: Real> GradedMap<T> for LiftWindow<'_> {
    fn apply(&self, a: &BandOperator<T>) -> Result<BandOperator<T>> {
        lift_operator(a, self)
    }

    fn compared_rows(&self) -> Option<Vec<usize>> {
        Some(self.interior())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiHomReport {
    pub window: Dist,
    pub admissible_pairs: usize,
    pub control_pairs: usize,
    pub multiplicative: bool,
    pub max_defect: f64,
    /// Sample indices `(i, j)` of the first admissible pair that fails.
    pub witness: Option<(usize, usize)>,
    /// Control pairs (propagation sum above the window) that also fail.
    pub control_failures: usize,
    /// `max ||f(a + b) - f(a) - f(b)||_max` and the scalar analogue.
    pub linearity_defect: f64,
    /// `max ||f(a)|| / ||a||` over the samples.
    pub norm_ratio: f64,
}

fn row_diff<T: Real>(a: &BandOperator<T>, b: &BandOperator<T>, rows: &Option<Vec<usize>>) -> f64 {
    let n = a.space().len();
    let dim = a.dim();
    let rows: Vec<usize> = match rows {
        Some(r) => (0..a.blocks()).flat_map(|blk| r.iter().map(move |&y| blk * n + y)).collect(),
        None => (0..dim).collect(),
    };
    let mut m = 0.0f64;
    for i in rows {
        for j in 0..dim {
            m = m.max((a.entry(i, j) - b.entry(i, j)).norm().to_f64_lossy());
        }
    }
    m
}

/// Checks `f(ab) = f(a) f(b)` on every sample pair with propagation sum at
/// most `window`; pairs above the window are negative controls.
pub fn check_quasi_homomorphism<T: Real>(
    f: &dyn GradedMap<T>,
    window: Dist,
    samples: &[BandOperator<T>],
    tol: f64,
) -> Result<QuasiHomReport> {
    let rows = f.compared_rows();
    let images: Vec<BandOperator<T>> = samples.iter().map(|a| f.apply(a)).collect::<Result<_>>()?;
    let (mut adm, mut ctl, mut ctl_fail) = (0, 0, 0);
    let mut max_defect = 0.0f64;
    let mut witness = None;
    for (i, a) in samples.iter().enumerate() {
        for (j, b) in samples.iter().enumerate() {
            let admissible = a.propagation() + b.propagation() <= window;
            let ab = a.multiply(b)?;
            let fab = match f.apply(&ab) {
                Ok(x) => x,
                Err(_) if !admissible => {
                    ctl += 1;
                    ctl_fail += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let defect = row_diff(&fab, &images[i].multiply(&images[j])?, &rows);
            if admissible {
                adm += 1;
                max_defect = max_defect.max(defect);
                if defect > tol && witness.is_none() {
                    witness = Some((i, j));
                }
            } else {
                ctl += 1;
                if defect > tol {
                    ctl_fail += 1;
                }
            }
        }
    }
    let mut linearity = 0.0f64;
    let two = creal(T::lit(2.0));
    for (i, a) in samples.iter().enumerate() {
        let scaled = f.apply(&a.scale(two))?;
        linearity = linearity.max(scaled.max_abs_diff(&images[i].scale(two))?.to_f64_lossy());
        if let Some(b) = samples.get(i + 1) {
            if a.propagation().max(b.propagation()) <= window {
                let sum = f.apply(&a.add(b)?)?;
                let parts = images[i].add(&images[i + 1])?;
                linearity = linearity.max(sum.max_abs_diff(&parts)?.to_f64_lossy());
            }
        }
    }
    let mut norm_ratio = 0.0f64;
    for (a, fa) in samples.iter().zip(&images) {
        let na = norm(a)?;
        if na > 0.0 {
            norm_ratio = norm_ratio.max(norm(fa)? / na);
        }
    }
    Ok(QuasiHomReport {
        window,
        admissible_pairs: adm,
        control_pairs: ctl,
        multiplicative: witness.is_none(),
        max_defect,
        witness,
        control_failures: ctl_fail,
        linearity_defect: linearity,
        norm_ratio,
    })
}

/// Certified scales standing in for the group-theoretic results that supply
/// them.
pub trait ControlOracle {
    /// `(r', eps')` such that `QS(d, r, r', eps, eps')` holds for term `m`.
    fn qs(&self, m: usize, d: u64, r: u64, eps: f64) -> (u64, f64);
    /// `(d', r')` such that `QI(d, d', r, r', eps)` holds for term `m`.
    fn qi(&self, m: usize, d: u64, r: u64, eps: f64) -> (u64, u64);
}

/// `r' = factor * r`, `eps' = eps * eps_factor`, `d' = factor * d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearOracle {
    pub factor: u64,
    pub eps_factor: f64,
}

impl ControlOracle for LinearOracle {
    fn qs(&self, _m: usize, _d: u64, r: u64, eps: f64) -> (u64, f64) {
        (self.factor.saturating_mul(r), eps * self.eps_factor)
    }

    fn qi(&self, _m: usize, d: u64, r: u64, _eps: f64) -> (u64, u64) {
        (self.factor.saturating_mul(d), self.factor.saturating_mul(r))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlRow {
    pub m: usize,
    pub d_m: u64,
    pub r_m: u64,
    /// `k_m(d_m, R_m, eps)`, or at `R = 0` when no `R` fits.
    pub k_m: u64,
    /// `sup {R : k_m(d_m, R, eps) <= r_m}`.
    pub big_r: Option<u64>,
    /// Diagonal `sup {s : l_m(s, s, eps) <= (r_m, r_m)}`.
    pub big_l: Option<u64>,
    pub eps_prime: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlTable {
    pub eps: f64,
    pub rows: Vec<ControlRow>,
    pub qs_verdict: Verdict,
    pub qi_verdict: Verdict,
    /// `(m, R)` where the oracle's `r'` dropped as `R` grew.
    pub non_monotone: Vec<(usize, u64)>,
    pub valid: bool,
}

impl ControlTable {
    /// CSV with header `m,d_m,r_m,k_m,R_m`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,d_m,r_m,k_m,R_m\n");
        for r in &self.rows {
            let big = r.big_r.map_or_else(|| "none".to_string(), |v| v.to_string());
            out.push_str(&format!("{},{},{},{},{}\n", r.m, r.d_m, r.r_m, r.k_m, big));
        }
        out
    }
}

fn largest_with(limit: u64, ok: impl Fn(u64) -> bool) -> Option<u64> {
    if !ok(0) {
        return None;
    }
    let (mut lo, mut hi) = (0u64, limit.saturating_add(1));
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Tabulates `k_m`, `R_m` and the diagonal `L_m` for each term, with
/// divergence verdicts. `probe` lists the `R` values at which the oracle is
/// checked for monotonicity; `R_m` itself is found by bisection on
/// `[0, r_m]`, which presumes monotonicity.
pub fn qs_qi_records(
    oracle: &dyn ControlOracle,
    d: &[u64],
    r: &[u64],
    eps: f64,
    probe: &[u64],
) -> Result<ControlTable> {
    QuantParams::new(0, eps)?;
    if d.len() != r.len() {
        return Err(Error::input(format!("d has {} terms but r has {}", d.len(), r.len())));
    }
    let mut non_monotone = Vec::new();
    let mut rows = Vec::with_capacity(r.len());
    for m in 0..r.len() {
        let (dm, rm) = (d[m], r[m]);
        let k = |big: u64| oracle.qs(m, dm, big, eps).0;
        for w in probe.windows(2) {
            if w[0] < w[1] && k(w[1]) < k(w[0]) {
                non_monotone.push((m, w[1]));
            }
        }
        let big_r = largest_with(rm, |x| k(x) <= rm);
        let big_l = largest_with(rm, |s| {
            let (dp, rp) = oracle.qi(m, s, s, eps);
            dp <= rm && rp <= rm
        });
        let at = big_r.unwrap_or(0);
        let (k_m, eps_prime) = oracle.qs(m, dm, at, eps);
        rows.push(ControlRow {
            m,
            d_m: dm,
            r_m: rm,
            k_m,
            big_r,
            big_l,
            eps_prime,
        });
    }
    let rs: Vec<u64> = rows.iter().map(|x| x.big_r.unwrap_or(0)).collect();
    let ls: Vec<u64> = rows.iter().map(|x| x.big_l.unwrap_or(0)).collect();
    Ok(ControlTable {
        eps,
        qs_verdict: divergence_verdict(&rs),
        qi_verdict: divergence_verdict(&ls),
        valid: non_monotone.is_empty(),
        non_monotone,
        rows,
    })
}

/// Identity of the given amplification on the space.
pub fn identity_on<T: Real>(space: &Arc<FiniteSpace>, blocks: usize) -> BandOperator<T> {
    let n = space.len() * blocks;
    BandOperator::amplified(Arc::clone(space), blocks, Matrix::identity(n)).expect("square")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverings::{quotient_covering, MarkedGroupBall};
    use crate::spaces::cayley::{cyclic, GroupLaw};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c12() -> Arc<FiniteSpace> {
        Arc::new(FiniteSpace::cycle(12))
    }

    fn shift(s: &Arc<FiniteSpace>, k: usize, scale: f64) -> BandOperator<f64> {
        let n = s.len();
        BandOperator::from_fn(Arc::clone(s), |x, y| if y == (x + k) % n { creal(scale) } else { czero() })
    }

    fn diag(s: &Arc<FiniteSpace>, d: &[f64]) -> BandOperator<f64> {
        BandOperator::from_fn(Arc::clone(s), |x, y| if x == y { creal(d[x]) } else { czero() })
    }

    fn p(r: Dist, eps: f64) -> QuantParams {
        QuantParams::new(r, eps).unwrap()
    }

    #[test]
    fn params_bounds() {
        assert!(QuantParams::new(1, 0.25).is_err());
        assert!(QuantParams::new(1, 0.0).is_err());
        assert!(QuantParams::new(1, 0.2499).is_ok());
    }

    #[test]
    fn projection_checks() {
        let s = Arc::new(FiniteSpace::path(2));
        let pr = diag(&s, &[1.0, 0.0]);
        for eps in [1e-6, 0.1, 0.24] {
            assert!(check_quasi_projection(&pr, p(0, eps)).unwrap().passes);
        }
        let half = diag(&s, &[0.5, 0.5]);
        let rep = check_quasi_projection(&half, p(0, 0.2499)).unwrap();
        assert!((rep.idempotent_residual - 0.25).abs() < 1e-12);
        assert!(!rep.passes);
        let q = diag(&s, &[0.95, 0.02]);
        let want: f64 = (0.95f64 * 0.95 - 0.95).abs().max((0.02f64 * 0.02 - 0.02).abs());
        assert!((want - 0.0475).abs() < 1e-12);
        assert!(check_quasi_projection(&q, p(0, 0.0476)).unwrap().passes);
        assert!(!check_quasi_projection(&q, p(0, 0.0474)).unwrap().passes);
        // Corner inclusion keeps every residual.
        let big = q.corner_embed(2);
        let a = check_quasi_projection(&q, p(0, 0.05)).unwrap();
        let b = check_quasi_projection(&big, p(0, 0.05)).unwrap();
        assert!((a.idempotent_residual - b.idempotent_residual).abs() < 1e-12);
        assert_eq!(a.passes, b.passes);
    }

    #[test]
    fn unitary_checks() {
        let s = c12();
        let id = BandOperator::<f64>::identity(Arc::clone(&s));
        assert!(check_quasi_unitary(&id, p(0, 0.01)).unwrap().passes);
        let nine = id.scale(creal(0.9));
        let rep = check_quasi_unitary(&nine, p(0, 0.2)).unwrap();
        assert!((rep.left_residual - 0.19).abs() < 1e-12);
        assert!(rep.passes);
        assert!(!check_quasi_unitary(&nine, p(0, 0.1899)).unwrap().passes);
        let sh = shift(&s, 1, 1.0);
        assert!(check_quasi_unitary(&sh, p(1, 1e-6)).unwrap().passes);
        assert!(!check_quasi_unitary(&sh, p(0, 1e-6)).unwrap().passes);
    }

    #[test]
    fn rounding() {
        let s = Arc::new(FiniteSpace::path(3));
        let pr = diag(&s, &[1.0, 0.0, 1.0]);
        let r = round_to_projection(&pr, p(0, 0.01)).unwrap();
        assert!(r.projection.max_abs_diff(&pr).unwrap() < 1e-12);
        assert_eq!(r.rank, 2);
        // Symmetric with eigenvalues 0.9 and 0.1 along (1,1)/sqrt2 and (1,-1)/sqrt2.
        let s2 = Arc::new(FiniteSpace::path(2));
        let m = BandOperator::from_fn(Arc::clone(&s2), |x, y| creal(if x == y { 0.5f64 } else { 0.4 }));
        let r = round_to_projection(&m, p(1, 0.1)).unwrap();
        assert_eq!(r.rank, 1);
        for x in 0..2 {
            for y in 0..2 {
                assert!((r.projection.entry(x, y).re - 0.5).abs() < 1e-12);
            }
        }
        assert!(r.distance <= 0.2);
        let mid = diag(&s2, &[0.5, 1.0]);
        assert!(round_to_projection(&mid, p(0, 0.2499)).is_err());
    }

    #[test]
    fn smoothing() {
        let s = c12();
        let adj = BandOperator::<f64>::adjacency(Arc::clone(&s));
        let triv = PartitionOfUnity::trivial(&s);
        assert_eq!(smooth_cycle(&adj, &triv).unwrap().max_abs_diff(&adj).unwrap(), 0.0);
        let arcs = Cover::new(&s, vec![(0..8).collect(), (6..12).chain(0..2).collect()]).unwrap();
        let pou = PartitionOfUnity::subordinate(&s, &arcs).unwrap();
        let id = BandOperator::<f64>::identity(Arc::clone(&s));
        assert!(smooth_cycle(&id, &pou).unwrap().max_abs_diff(&id).unwrap() < 1e-12);
        let sm = smooth_cycle(&adj, &pou).unwrap();
        assert!(sm.propagation() <= adj.propagation());
        for x in 0..12 {
            for y in 0..12 {
                // Independent evaluation of the weight overlap.
                let mut w = 0.0;
                for row in &pou.weights {
                    w += row[x].sqrt() * row[y].sqrt();
                }
                assert!((sm.entry(x, y).re - adj.entry(x, y).re * w).abs() < 1e-14);
            }
        }
        // Interior of each arc is undamped; the boundary is damped.
        assert!((sm.entry(3, 4).re - 1.0).abs() < 1e-12);
        assert!(sm.entry(7, 8).re < 1.0);
        let bad = PartitionOfUnity {
            members: triv.members.clone(),
            weights: vec![vec![0.5; 12]],
        };
        assert!(smooth_cycle(&adj, &bad).is_err());
    }

    #[test]
    fn index_form_cases() {
        let s = c12();
        let u = shift(&s, 1, 1.0);
        let f = index_form(&u).unwrap();
        assert_eq!(f.op.max_abs_diff(&unit_corner(&u)).unwrap(), 0.0);
        let z = BandOperator::<f64>::zero(Arc::clone(&s));
        let iz = index_form(&z).unwrap();
        let want = BandOperator::<f64>::identity(Arc::clone(&s)).corner_embed(1);
        // diag(0, 1): move the identity to the lower block.
        for i in 0..24 {
            for j in 0..24 {
                let w = if i == j && i >= 12 { 1.0 } else { 0.0 };
                assert_eq!(iz.op.entry(i, j).re, w);
            }
        }
        assert_eq!(want.dim(), 24);
        let nine = shift(&s, 1, 0.9);
        let f9 = index_form(&nine).unwrap();
        assert!(f9.block_propagations.iter().flatten().all(|&x| x <= 3));
        let rep = check_quasi_projection(&f9.op, p(3, 0.2)).unwrap();
        assert!(rep.idempotent_residual > 0.0);
        // Scalar oracle: every block of I(0.9 u) has constant row sums.
        let sc = scalar_index_form(Complex::new(0.9, 0.0));
        for i in 0..2 {
            for j in 0..2 {
                let row: Complex<f64> = (0..12).map(|y| f9.op.entry(i * 12, j * 12 + y)).sum();
                assert!((row - sc[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn index_class_pipeline() {
        let s = c12();
        let u = shift(&s, 1, 1.0);
        let rep = index_class_check(&u, &PartitionOfUnity::trivial(&s), p(3, 0.1)).unwrap();
        assert_eq!(rep.distance_from_unit_corner, 0.0);
        assert_eq!(rep.evaluation_is_unit_corner, Some(true));
        assert_eq!(rep.signature, (0, 0));
        let arcs = Cover::new(&s, vec![(0..8).collect(), (6..12).chain(0..2).collect()]).unwrap();
        let pou = PartitionOfUnity::subordinate(&s, &arcs).unwrap();
        let rep = index_class_check(&u, &pou, p(3, 0.2)).unwrap();
        assert!(rep.derived_scale <= 3);
        assert_eq!(rep.check.passes, rep.derived_eps <= 0.2);
        let z = BandOperator::<f64>::zero(Arc::clone(&s));
        let rep = index_class_check(&z, &pou, p(0, 0.1)).unwrap();
        assert_eq!(rep.signature, (12, 12));
        assert_eq!(rep.evaluation_is_unit_corner, Some(false));
    }

    fn z_window() -> (Arc<MarkedGroupBall>, crate::coverings::CoveringMap) {
        let ball = Arc::new(MarkedGroupBall::new(1, 12).unwrap());
        let q = Arc::new(cyclic(12).unwrap());
        let c = quotient_covering(&ball, &q).unwrap();
        (ball, c)
    }

    #[test]
    fn paths() {
        let s = c12();
        let id = BandOperator::<f64>::identity(Arc::clone(&s));
        let adj = BandOperator::<f64>::adjacency(Arc::clone(&s));
        let cpath = LocalisationPath::constant(id.clone(), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(path_evaluate(&cpath).unwrap().max_abs_diff(&id).unwrap(), 0.0);
        let two = LocalisationPath::new(vec![0.0, 1.0], vec![adj.clone(), id.clone()], 0).unwrap();
        assert_eq!(path_evaluate(&two).unwrap().max_abs_diff(&adj).unwrap(), 0.0);
        assert!(LocalisationPath::<f64>::new(vec![], vec![], 0).is_err());
        assert!(LocalisationPath::new(vec![0.0, 1.0], vec![id.clone(), adj.clone()], 1).is_err());
        let late = LocalisationPath::new(vec![0.5], vec![id.clone()], 0).unwrap();
        assert!(path_evaluate(&late).is_err());

        let (ball, c) = z_window();
        let q = c.target_group().unwrap();
        let w = LiftWindow::new(&c, 3).unwrap();
        let qadj = BandOperator::<f64>::adjacency(q.arc_space());
        let qid = BandOperator::<f64>::identity(q.arc_space());
        let path = LocalisationPath::new(vec![0.0, 1.0], vec![qadj.clone(), qid.clone()], 0).unwrap();
        let lifted = lift_path(&path, &w, Some(1.0)).unwrap();
        assert_eq!(lifted.square_residual, 0.0);
        assert_eq!(lifted.path.ops()[1].max_abs_diff(&BandOperator::identity(ball.arc_space())).unwrap(), 0.0);
        assert_eq!(lifted.bound_holds, Some(true));
        let far = BandOperator::<f64>::from_fn(q.arc_space(), |x, y| {
            if q.space().dist(x, y) == 5 {
                creal(1.0)
            } else {
                czero()
            }
        });
        let bad = LocalisationPath::new(vec![0.0, 1.0], vec![far, qid], 0).unwrap();
        let err = lift_path(&bad, &w, None).unwrap_err().to_string();
        assert!(err.contains("sample 0"), "{err}");
    }

    #[test]
    fn quasi_homomorphisms() {
        let s = c12();
        let samples = vec![
            BandOperator::<f64>::adjacency(Arc::clone(&s)),
            shift(&s, 1, 2.0),
            BandOperator::identity(Arc::clone(&s)),
        ];
        let id_map = MapFn(|a: &BandOperator<f64>| Ok(a.clone()));
        assert!(check_quasi_homomorphism(&id_map, 2, &samples, 1e-12).unwrap().multiplicative);

        let (_, c) = z_window();
        let q = c.target_group().unwrap();
        let w = LiftWindow::new(&c, 3).unwrap();
        let qs = vec![
            BandOperator::<f64>::adjacency(q.arc_space()),
            BandOperator::identity(q.arc_space()),
            BandOperator::from_fn(q.arc_space(), |x, y| {
                if y == q.mul_idx(x, q.marking()[0]) {
                    creal(1.0)
                } else {
                    czero()
                }
            }),
        ];
        let rep = check_quasi_homomorphism(&w, 3, &qs, 1e-12).unwrap();
        assert!(rep.multiplicative);
        assert!(rep.admissible_pairs > 0);
        assert!(rep.linearity_defect < 1e-12);

        let square = MapFn(|a: &BandOperator<f64>| {
            let s = Arc::clone(a.space());
            Ok(BandOperator::from_fn(s, |x, y| a.entry(x, y) * a.entry(x, y)))
        });
        let rep = check_quasi_homomorphism(&square, 2, &samples, 1e-12).unwrap();
        assert!(!rep.multiplicative);
        assert!(rep.witness.is_some());
    }

    struct Decreasing;
    impl ControlOracle for Decreasing {
        fn qs(&self, _: usize, _: u64, r: u64, eps: f64) -> (u64, f64) {
            (1000u64.saturating_sub(r), eps)
        }
        fn qi(&self, _: usize, d: u64, r: u64, _: f64) -> (u64, u64) {
            (d, r)
        }
    }

    #[test]
    fn control_tables() {
        let ms: Vec<u64> = (1..=10).map(|m| 4u64.pow(m)).collect();
        let d = vec![1; ms.len()];
        let doubling = LinearOracle {
            factor: 2,
            eps_factor: 0.5,
        };
        let t = qs_qi_records(&doubling, &d, &ms, 0.1, &[0, 1, 10, 100]).unwrap();
        for row in &t.rows {
            assert_eq!(row.big_r, Some(row.r_m / 2));
            assert!(row.k_m <= row.r_m);
        }
        assert_eq!(t.qs_verdict, Verdict::Increasing);
        assert!(t.valid);
        assert!(t.to_csv().starts_with("m,d_m,r_m,k_m,R_m\n"));
        let same = LinearOracle {
            factor: 1,
            eps_factor: 1.0,
        };
        let t = qs_qi_records(&same, &d, &ms, 0.1, &[]).unwrap();
        assert!(t.rows.iter().all(|r| r.big_r == Some(r.r_m)));
        let t = qs_qi_records(&Decreasing, &[1], &[100], 0.1, &[0, 10, 20]).unwrap();
        assert!(!t.valid);
        assert_eq!(t.non_monotone.len(), 2);
    }

    fn random_projection(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        // Orthonormalise random vectors.
        let mut basis: Vec<Vec<Complex<f64>>> = Vec::new();
        while basis.len() < rank {
            let mut v: Vec<Complex<f64>> =
                (0..n).map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            for b in &basis {
                let c: Complex<f64> = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= bi * c;
                }
            }
            let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nv > 1e-6 {
                basis.push(v.into_iter().map(|z| z / nv).collect());
            }
        }
        Matrix::from_fn(n, n, |i, j| basis.iter().map(|b| b[i] * b[j].conj()).sum())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn rounding_stays_close(seed in 0u64..1000, rank in 0usize..6, eps in 0.01f64..0.2) {
            let n = 6;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let proj = random_projection(n, rank, &mut rng);
            let noise = Matrix::from_fn(n, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let herm = noise.add(&noise.adjoint());
            let scale = herm.spectral_norm_full().unwrap();
            let pert = proj.add(&herm.scale(creal(eps / 2.0 / scale)));
            let s = Arc::new(FiniteSpace::path(n));
            let op = BandOperator::new(s, pert).unwrap();
            let params = QuantParams::new(n as Dist, eps).unwrap();
            let check = check_quasi_projection(&op, params).unwrap();
            prop_assume!(check.passes);
            let r = round_to_projection(&op, params).unwrap();
            let q = &r.projection;
            prop_assert!(q.multiply(q).unwrap().max_abs_diff(q).unwrap() < 1e-10);
            prop_assert!(q.max_abs_diff(&q.adjoint()).unwrap() < 1e-10);
            prop_assert!(r.distance <= 2.0 * eps);
        }

        #[test]
        fn smoothing_keeps_identity(cut in 1usize..11, overlap in 1usize..3) {
            let s = c12();
            let a: Vec<usize> = (0..cut + overlap).map(|i| i % 12).collect();
            let b: Vec<usize> = (cut..12 + overlap).map(|i| i % 12).collect();
            let cover = Cover::new(&s, vec![a, b]).unwrap();
            let pou = PartitionOfUnity::subordinate(&s, &cover).unwrap();
            let id = BandOperator::<f64>::identity(Arc::clone(&s));
            prop_assert!(smooth_cycle(&id, &pou).unwrap().max_abs_diff(&id).unwrap() < 1e-12);
            let adj = BandOperator::<f64>::adjacency(Arc::clone(&s));
            prop_assert!(smooth_cycle(&adj, &pou).unwrap().propagation() <= 1);
        }
    }

    #[test]
    fn quasi_unitary_on_group_ring() {
        let q = cyclic(8).unwrap();
        let u = crate::bandops::GroupRingElement::<f64>::delta(&q, q.marking()[0])
            .unwrap()
            .to_band_operator(&q)
            .unwrap();
        assert!(check_quasi_unitary(&u, p(1, 1e-9)).unwrap().passes);
        assert_eq!(scalar_evaluation(&u), Some(Complex::new(1.0, 0.0)));
    }
}

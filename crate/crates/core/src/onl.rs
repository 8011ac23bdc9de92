//! Operator norm localisation estimates and the control-function arithmetic
//! that goes with them.
//!
//! Localisation is only ever checked on sampled operators, so an
//! [`OnlCertificate`] is empirical evidence for the sampled ensemble.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandops::BandOperator;
use crate::coverings::{Verdict, WINDOW_EVIDENCE};
use crate::error::{Error, Result};
use crate::linalg::{column_restricted_top, vec_norm, Matrix};
use crate::scalar::{czero, Real};
use crate::spaces::{Dist, FiniteSpace};

/// Spaces this small also get an exhaustive search over all supports.
pub const EXHAUSTIVE_SUPPORT_LIMIT: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportSearch {
    Balls,
    BallsAndSubsets,
}

#[derive(Clone, Debug)]
pub struct Localization<T: Real> {
    /// Unit vector on the full (amplified) index set.
    pub vector: Vec<Complex<T>>,
    /// Points of the space carrying the support.
    pub support: Vec<usize>,
    pub support_diameter: Dist,
    /// `||T eta|| / ||T||`, clamped to `[0, 1]`.
    pub ratio: T,
    pub method: SupportSearch,
}

fn amplified_cols(points: &[usize], n: usize, blocks: usize) -> Vec<usize> {
    (0..blocks).flat_map(|b| points.iter().map(move |&p| b * n + p)).collect()
}

fn best_on<T: Real>(m: &Matrix<T>, cols: &[usize], tol: T) -> Result<(T, Vec<Complex<T>>)> {
    let rows: Vec<usize> = (0..m.rows())
        .filter(|&i| cols.iter().any(|&j| m[(i, j)] != czero()))
        .collect();
    if rows.is_empty() {
        let mut v = vec![czero(); cols.len()];
        v[0] = Complex::new(T::one(), T::zero());
        return Ok((T::zero(), v));
    }
    let sub = m.select(&rows, cols);
    let all: Vec<usize> = (0..cols.len()).collect();
    column_restricted_top(&sub, &all, tol)
}

/// Closed balls `B(x, rho)` with diameter at most `d`, largest per centre,
/// without repeats.
fn candidate_balls(space: &FiniteSpace, d: Dist) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    for x in 0..space.len() {
        let mut best = vec![x];
        for rho in 1..=space.eccentricity(x) {
            let b = space.ball(x, rho);
            if space.set_diameter(&b) > d {
                break;
            }
            best = b;
        }
        seen.insert(best);
    }
    seen.into_iter().collect()
}

fn candidate_subsets(space: &FiniteSpace, d: Dist) -> Vec<Vec<usize>> {
    let n = space.len();
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let pts: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if space.set_diameter(&pts) <= d {
            out.push(pts);
        }
    }
    out
}

/// Best unit vector supported in a set of diameter at most `support_diameter`.
///
/// Candidate supports are closed balls; on spaces with at most
/// [`EXHAUSTIVE_SUPPORT_LIMIT`] points every subset is tried as well. The
/// zero operator has ratio 1 by convention.
pub fn localization_search<T: Real>(op: &BandOperator<T>, support_diameter: Dist, tol: T) -> Result<Localization<T>> {
    let space = op.space();
    let n = space.len();
    let norm = op.operator_norm(tol)?;
    let mut method = SupportSearch::Balls;
    let mut sets = candidate_balls(space, support_diameter);
    if n <= EXHAUSTIVE_SUPPORT_LIMIT {
        method = SupportSearch::BallsAndSubsets;
        sets.extend(candidate_subsets(space, support_diameter));
    }
    let mut best: Option<(T, Vec<usize>, Vec<Complex<T>>)> = None;
    for set in sets {
        let cols = amplified_cols(&set, n, op.blocks());
        let (sigma, v) = best_on(op.matrix(), &cols, tol)?;
        if best.as_ref().is_none_or(|(s, _, _)| sigma > *s) {
            let mut full = vec![czero(); op.dim()];
            for (&c, &x) in cols.iter().zip(&v) {
                full[c] = x;
            }
            best = Some((sigma, set, full));
        }
    }
    let (sigma, support, vector) = best.expect("every space has a singleton ball");
    let ratio = if norm == T::zero() {
        T::one()
    } else {
        (sigma / norm).min(T::one())
    };
    Ok(Localization {
        support_diameter: space.set_diameter(&support),
        vector,
        support,
        ratio,
        method,
    })
}

/// Which structured and random operators to sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// Complex Gaussian entries on every pair at distance `<= R`.
    pub gaussian: usize,
    /// Include `A, A^2, ..., A^R` for the distance-one adjacency `A`.
    pub adjacency_powers: bool,
    /// Products of disjoint transpositions of displacement `<= R`, with
    /// random unit phases.
    pub permutations: usize,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            gaussian: 4,
            adjacency_powers: true,
            permutations: 4,
            seed: 0,
        }
    }
}

impl EnsembleSpec {
    pub fn kind(&self) -> String {
        let mut parts = Vec::new();
        if self.gaussian > 0 {
            parts.push("gaussian_band");
        }
        if self.adjacency_powers {
            parts.push("adjacency_powers");
        }
        if self.permutations > 0 {
            parts.push("permutation_band");
        }
        parts.join("+")
    }
}

#[derive(Clone, Debug)]
pub struct Sample<T: Real> {
    pub label: String,
    pub op: BandOperator<T>,
}

fn gauss<T: Real>(rng: &mut ChaCha8Rng) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re), T::lit(im))
}

/// Deterministic ensemble of propagation-`<= radius` operators.
pub fn sample_ensemble<T: Real>(space: &Arc<FiniteSpace>, radius: Dist, spec: &EnsembleSpec) -> Vec<Sample<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = space.len();
    let mut out = Vec::new();
    for i in 0..spec.gaussian {
        let mut m = Matrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                if space.dist(x, y) <= radius {
                    m[(x, y)] = gauss(&mut rng);
                }
            }
        }
        out.push(Sample {
            label: format!("gaussian_band[{i}]"),
            op: BandOperator::new(Arc::clone(space), m).expect("square"),
        });
    }
    if spec.adjacency_powers && radius > 0 {
        let a = BandOperator::<T>::adjacency(Arc::clone(space));
        let mut p = a.clone();
        for k in 1..=radius {
            out.push(Sample {
                label: format!("adjacency^{k}"),
                op: p.clone(),
            });
            p = p.multiply(&a).expect("same space");
        }
    }
    for i in 0..spec.permutations {
        let mut order: Vec<usize> = (0..n).collect();
        for j in (1..n).rev() {
            order.swap(j, rng.random_range(0..=j));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for &x in &order {
            if used[x] {
                continue;
            }
            let partners: Vec<usize> = space
                .ball(x, radius)
                .into_iter()
                .filter(|&y| y != x && !used[y])
                .collect();
            used[x] = true;
            if partners.is_empty() {
                continue;
            }
            let y = partners[rng.random_range(0..partners.len())];
            used[y] = true;
            perm.swap(x, y);
        }
        let mut m = Matrix::zeros(n, n);
        for (x, &y) in perm.iter().enumerate() {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            m[(y, x)] = Complex::from_polar(T::one(), T::lit(theta));
        }
        out.push(Sample {
            label: format!("permutation_band[{i}]"),
            op: BandOperator::new(Arc::clone(space), m).expect("square"),
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleInfo {
    pub kind: String,
    pub size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OnlWitness {
    pub operator: String,
    pub support: Vec<usize>,
    pub support_diameter: Dist,
    /// `(re, im)` on the full index set.
    pub vector: Vec<[f64; 2]>,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub operator: String,
    pub best_ratio: f64,
    pub support_cap: Dist,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OnlCertificate {
    pub space_hash: String,
    pub radius: Dist,
    pub c: f64,
    /// Least support diameter serving every sample, if one was found.
    pub f_r: Option<Dist>,
    pub ensemble: EnsembleInfo,
    pub witnesses: Vec<OnlWitness>,
    pub min_ratio: f64,
    pub counterexample: Option<Counterexample>,
    pub evidence: String,
}

pub const SAMPLED_EVIDENCE: &str = "sampled ensemble, not a universal certificate";

#[derive(Serialize)]
struct CertificateSummary<'a> {
    space_hash: &'a str,
    #[serde(rename = "R")]
    radius: Dist,
    c: f64,
    f_r: Option<Dist>,
    ensemble: &'a EnsembleInfo,
    witnesses: usize,
    min_ratio: f64,
}

impl OnlCertificate {
    /// Compact JSON summary.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&CertificateSummary {
            space_hash: &self.space_hash,
            radius: self.radius,
            c: self.c,
            f_r: self.f_r,
            ensemble: &self.ensemble,
            witnesses: self.witnesses.len(),
            min_ratio: self.min_ratio,
        })
        .expect("plain data")
    }

    /// Rechecks every witness against its operator: unit norm, support
    /// diameter, and `||T eta|| >= (c - 1e-9) ||T||`.
    pub fn verify(&self, space: &FiniteSpace, samples: &[Sample<f64>]) -> Result<()> {
        let Some(f_r) = self.f_r else {
            return Ok(());
        };
        for w in &self.witnesses {
            let s = samples
                .iter()
                .find(|s| s.label == w.operator)
                .ok_or_else(|| Error::input(format!("unknown operator {}", w.operator)))?;
            let v: Vec<Complex<f64>> = w.vector.iter().map(|&[a, b]| Complex::new(a, b)).collect();
            if (vec_norm(&v) - 1.0).abs() > 1e-12 {
                return Err(Error::pre(format!("witness for {} is not a unit vector", w.operator)));
            }
            let n = space.len();
            let pts: BTreeSet<usize> = (0..v.len()).filter(|&i| v[i] != czero()).map(|i| i % n).collect();
            let pts: Vec<usize> = pts.into_iter().collect();
            if space.set_diameter(&pts) > f_r {
                return Err(Error::pre(format!("witness for {} exceeds f_R", w.operator)));
            }
            let norm = s.op.operator_norm(1e-10)?;
            let tv = vec_norm(&s.op.matrix().mul_vec(&v));
            if norm > 0.0 && tv < (self.c - 1e-9) * norm {
                return Err(Error::pre(format!("witness for {} is below c", w.operator)));
            }
        }
        Ok(())
    }
}

/// Smallest support diameter `<= cap` reaching ratio `c`, by bisection on
/// the monotone ratio curve.
fn least_diameter<T: Real>(op: &BandOperator<T>, c: T, cap: Dist, tol: T) -> Result<(Option<Dist>, Localization<T>)> {
    let top = localization_search(op, cap, tol)?;
    if top.ratio < c {
        return Ok((None, top));
    }
    let (mut lo, mut hi, mut best) = (0, cap, top);
    let at_zero = localization_search(op, 0, tol)?;
    if at_zero.ratio >= c {
        return Ok((Some(0), at_zero));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let l = localization_search(op, mid, tol)?;
        if l.ratio >= c {
            hi = mid;
            best = l;
        } else {
            lo = mid;
        }
    }
    Ok((Some(hi), best))
}

/// Estimates the ONL support bound `f_R` at constant `c` over a seeded
/// ensemble, or reports the hardest operator when `support_cap` is too small.
pub fn onl_estimate(
    space: &Arc<FiniteSpace>,
    radius: Dist,
    c: f64,
    spec: &EnsembleSpec,
    support_cap: Option<Dist>,
) -> Result<OnlCertificate> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::input(format!("ONL constant {c} outside (0, 1)")));
    }
    let samples = sample_ensemble::<f64>(space, radius, spec);
    if samples.is_empty() {
        return Err(Error::input("ensemble is empty"));
    }
    let cap = support_cap.unwrap_or_else(|| space.diameter()).min(space.diameter());
    let tol = 1e-10;
    let mut witnesses = Vec::new();
    let mut f_r = Some(0);
    let mut min_ratio = f64::INFINITY;
    let mut counterexample: Option<Counterexample> = None;
    for s in &samples {
        let (d, loc) = least_diameter(&s.op, c, cap, tol)?;
        match d {
            Some(d) => {
                f_r = f_r.map(|f: Dist| f.max(d));
                min_ratio = min_ratio.min(loc.ratio);
                witnesses.push(OnlWitness {
                    operator: s.label.clone(),
                    support: loc.support,
                    support_diameter: loc.support_diameter,
                    vector: loc.vector.iter().map(|z| [z.re, z.im]).collect(),
                    ratio: loc.ratio,
                });
            }
            None => {
                f_r = None;
                if counterexample.as_ref().is_none_or(|ce| loc.ratio < ce.best_ratio) {
                    counterexample = Some(Counterexample {
                        operator: s.label.clone(),
                        best_ratio: loc.ratio,
                        support_cap: cap,
                    });
                }
                min_ratio = min_ratio.min(loc.ratio);
            }
        }
    }
    Ok(OnlCertificate {
        space_hash: space.content_hash(),
        radius,
        c,
        f_r,
        ensemble: EnsembleInfo {
            kind: spec.kind(),
            size: samples.len(),
            seed: spec.seed,
        },
        witnesses: if f_r.is_some() { witnesses } else { Vec::new() },
        min_ratio,
        counterexample,
        evidence: SAMPLED_EVIDENCE.to_string(),
    })
}

/// Nondecreasing length function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlFunction {
    /// Right-continuous step function through `(k_i, f_i)`: `f(k) = f_i` for
    /// `k_i <= k < k_{i+1}`, and the last value beyond the table. Undefined
    /// below the first breakpoint.
    Step { points: Vec<(u64, u64)> },
    /// `f(k) = slope * k + offset`.
    Linear { slope: u64, offset: u64 },
    /// `g(k) = (n - 1) k + f(n k)`.
    Amplified { n: u64, inner: Box<ControlFunction> },
}

impl ControlFunction {
    pub fn step(points: Vec<(u64, u64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("step control function needs at least one point"));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0 || w[0].1 > w[1].1) {
            return Err(Error::input(
                "step table must have strictly increasing arguments and nondecreasing values",
            ));
        }
        Ok(ControlFunction::Step { points })
    }

    pub fn linear(slope: u64, offset: u64) -> Self {
        ControlFunction::Linear { slope, offset }
    }

    pub fn eval(&self, k: u64) -> Option<u64> {
        match self {
            ControlFunction::Step { points } => {
                let i = points.partition_point(|&(x, _)| x <= k);
                (i > 0).then(|| points[i - 1].1)
            }
            ControlFunction::Linear { slope, offset } => slope.checked_mul(k)?.checked_add(*offset),
            ControlFunction::Amplified { n, inner } => {
                let f = inner.eval(n.checked_mul(k)?)?;
                (n - 1).checked_mul(k)?.checked_add(f)
            }
        }
    }
}

impl fmt::Display for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlFunction::Step { .. } => f.write_str("f(k)"),
            ControlFunction::Linear { slope, offset } => write!(f, "{slope}k+{offset}"),
            ControlFunction::Amplified { n, .. } => {
                let lead = match n - 1 {
                    0 => String::new(),
                    1 => "k+".to_string(),
                    m => format!("{m}k+"),
                };
                let arg = if *n == 1 { "k".to_string() } else { format!("{n}k") };
                write!(f, "{lead}f({arg})")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplifyMode {
    /// Smallest `n` with `c^(1/n) >= c_target`.
    Root,
    /// Largest `n >= 1` with `c^n >= c_target`.
    Verbatim,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Amplification {
    pub n: u64,
    pub g: ControlFunction,
    pub mode: AmplifyMode,
    /// `c^(1/n)` in root mode, `c^n` in verbatim mode.
    pub achieved: f64,
}

const POW_SLACK: f64 = 1e-12;

/// Picks the amplification power `n` and returns `g(k) = (n-1)k + f(nk)`.
pub fn amplify_constant(c: f64, f: &ControlFunction, c_target: f64, mode: AmplifyMode) -> Result<Amplification> {
    for (name, v) in [("c", c), ("target", c_target)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::input(format!("{name} = {v} outside (0, 1)")));
        }
    }
    let meets = |x: f64| x >= c_target * (1.0 - POW_SLACK);
    let (n, achieved) = match mode {
        AmplifyMode::Root => {
            let mut n = ((c.ln() / c_target.ln()).ceil() as u64).max(1);
            while n > 1 && meets(c.powf(1.0 / (n - 1) as f64)) {
                n -= 1;
            }
            while !meets(c.powf(1.0 / n as f64)) {
                n += 1;
            }
            (n, c.powf(1.0 / n as f64))
        }
        AmplifyMode::Verbatim => {
            if !meets(c) {
                return Err(Error::pre(format!(
                    "no n >= 1 has c^n >= target: c = {c} is already below {c_target}"
                )));
            }
            let mut n = 1u64;
            while meets(c.powi((n + 1) as i32)) {
                n += 1;
            }
            (n, c.powi(n as i32))
        }
    };
    Ok(Amplification {
        n,
        g: ControlFunction::Amplified {
            n,
            inner: Box::new(f.clone()),
        },
        mode,
        achieved,
    })
}

/// `(2R + 2 delta, |S|^(6 delta))`: diameter and colour bounds of Roe's cover.
pub fn roe_cover_bound(degree: u64, delta: u64, radius: u64) -> Result<(u64, BigUint)> {
    if degree < 2 {
        return Err(Error::input("generating set must have at least 2 elements"));
    }
    let exp = 6u32
        .checked_mul(u32::try_from(delta).map_err(|_| Error::input("delta too large"))?)
        .ok_or_else(|| Error::input("delta too large"))?;
    Ok((2 * radius + 2 * delta, BigUint::from(degree).pow(exp)))
}

/// `1 / (2|S|)`.
pub fn onl_constant_floor(degree: u64) -> Result<f64> {
    if degree == 0 {
        return Err(Error::input("generating set is empty"));
    }
    Ok(1.0 / (2.0 * degree as f64))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LacunaryControls {
    pub delta: Vec<u64>,
    pub r: Vec<u64>,
    /// `floor((r/delta - 2) / 18)`, clamped at 0.
    pub radii: Vec<u64>,
    /// `floor((r/delta - 12) / 18)`, clamped at 0: the other constant in the
    /// same derivation, kept for comparison.
    pub radii_alt: Vec<u64>,
    /// `sup {R : R + f_m(R) <= r_m}` when control functions are supplied;
    /// `None` entries have no admissible `R`.
    pub sup_radii: Option<Vec<Option<u64>>>,
    pub verdict: Verdict,
    pub formula: String,
    pub evidence: String,
}

impl LacunaryControls {
    /// True when the stored radii match a fresh evaluation.
    pub fn recheck(&self) -> bool {
        self.radii
            .iter()
            .zip(self.delta.iter().zip(&self.r))
            .all(|(&rm, (&d, &r))| rm == control_radius(d, r, 2))
    }
}

/// `floor((r/delta - offset) / 18)` clamped at 0, in exact integer arithmetic.
pub fn control_radius(delta: u64, r: u64, offset: u64) -> u64 {
    let lo = offset * delta;
    if r <= lo {
        0
    } else {
        (r - lo) / (18 * delta)
    }
}

/// Largest `R <= r` with `R + f(R) <= r`.
pub fn sup_radius(f: &ControlFunction, r: u64) -> Option<u64> {
    let fits = |x: u64| f.eval(x).and_then(|v| v.checked_add(x)).is_some_and(|s| s <= r);
    if !fits(0) {
        return None;
    }
    let (mut lo, mut hi) = (0u64, r + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Divergence on a window: over the second half the values never drop and
/// end strictly above where the half started.
pub fn divergence_verdict(values: &[u64]) -> Verdict {
    if values.len() < 3 {
        return Verdict::InsufficientData;
    }
    let tail = &values[values.len() / 2..];
    let nondecreasing = tail.windows(2).all(|w| w[0] <= w[1]);
    if nondecreasing && tail[tail.len() - 1] > tail[0] {
        Verdict::Increasing
    } else {
        Verdict::NotIncreasing
    }
}

pub fn lacunary_control_radius(
    delta: &[u64],
    r: &[u64],
    controls: Option<&[ControlFunction]>,
) -> Result<LacunaryControls> {
    if delta.len() != r.len() {
        return Err(Error::input(format!(
            "delta has {} terms but r has {}",
            delta.len(),
            r.len()
        )));
    }
    if delta.iter().chain(r).any(|&v| v == 0) {
        return Err(Error::input("delta_m and r_m must be positive"));
    }
    let sup_radii = match controls {
        Some(fs) if fs.len() != r.len() => {
            return Err(Error::input("one control function per term is required"));
        }
        Some(fs) => Some(fs.iter().zip(r).map(|(f, &rm)| sup_radius(f, rm)).collect()),
        None => None,
    };
    let radii: Vec<u64> = delta.iter().zip(r).map(|(&d, &rm)| control_radius(d, rm, 2)).collect();
    let radii_alt = delta.iter().zip(r).map(|(&d, &rm)| control_radius(d, rm, 12)).collect();
    Ok(LacunaryControls {
        verdict: divergence_verdict(&radii),
        delta: delta.to_vec(),
        r: r.to_vec(),
        radii,
        radii_alt,
        sup_radii,
        formula: "R_m = floor((r_m/delta_m - 2)/18); radii_alt uses 18 delta R + 12 delta <= r".to_string(),
        evidence: WINDOW_EVIDENCE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::creal;
    use proptest::prelude::*;

    fn cycle_adj(n: usize) -> BandOperator<f64> {
        BandOperator::adjacency(Arc::new(FiniteSpace::cycle(n)))
    }

    #[test]
    fn diameter_zero_on_cycle() {
        let a = cycle_adj(100);
        let l = localization_search(&a, 0, 1e-10).unwrap();
        // Single column oracle: each column has two unit entries, ||A|| = 2.
        assert!((l.ratio - 2f64.sqrt() / 2.0).abs() < 1e-9);
        assert_eq!(l.support.len(), 1);
        assert_eq!(l.method, SupportSearch::Balls);
    }

    #[test]
    fn identity_and_zero() {
        let s = Arc::new(FiniteSpace::path(7));
        let id = BandOperator::<f64>::identity(Arc::clone(&s));
        assert!((localization_search(&id, 0, 1e-10).unwrap().ratio - 1.0).abs() < 1e-12);
        let z = BandOperator::<f64>::zero(s);
        assert_eq!(localization_search(&z, 2, 1e-10).unwrap().ratio, 1.0);
    }

    #[test]
    fn monotone_and_full_on_small_cycle() {
        let a = cycle_adj(30);
        let mut prev = 0.0;
        for d in 0..=15 {
            let l = localization_search(&a, d, 1e-10).unwrap();
            assert!(l.ratio >= prev - 1e-12);
            assert!(l.support_diameter <= d);
            prev = l.ratio;
        }
        assert!(prev >= 1.0 - 1e-9);
    }

    #[test]
    fn subsets_beat_balls_on_tiny_spaces() {
        // On C_8 a ball of diameter 1 is a point; an edge does better for I + A.
        let a = cycle_adj(8);
        let t = a.add(&a.unit_like()).unwrap();
        let l = localization_search(&t, 1, 1e-10).unwrap();
        assert_eq!(l.method, SupportSearch::BallsAndSubsets);
        assert_eq!(l.support.len(), 2);
        // Gram [[3,2],[2,3]] against ||I + A|| = 3.
        assert!((l.ratio - 5f64.sqrt() / 3.0).abs() < 1e-9);
    }

    #[test]
    fn amplified_search_uses_all_blocks() {
        let s = Arc::new(FiniteSpace::path(20));
        let m = Matrix::from_fn(40, 40, |i, j| if i == j { creal(if i >= 20 { 3.0f64 } else { 1.0 }) } else { czero() });
        let op = BandOperator::amplified(s, 2, m).unwrap();
        let l = localization_search(&op, 0, 1e-10).unwrap();
        assert!((l.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_on_path() {
        let s = Arc::new(FiniteSpace::path(50));
        let spec = EnsembleSpec {
            gaussian: 2,
            adjacency_powers: true,
            permutations: 2,
            seed: 7,
        };
        let cert = onl_estimate(&s, 1, 0.5, &spec, None).unwrap();
        let f = cert.f_r.unwrap();
        assert!(f <= 49);
        assert!(cert.min_ratio >= 0.5);
        assert_eq!(cert.ensemble.size, 5);
        cert.verify(&s, &sample_ensemble(&s, 1, &spec)).unwrap();
        assert!(cert.summary_json().contains("\"R\": 1"));
    }

    #[test]
    fn estimate_single_point() {
        let s = Arc::new(FiniteSpace::path(1));
        let cert = onl_estimate(&s, 1, 0.5, &EnsembleSpec::default(), None).unwrap();
        assert_eq!(cert.f_r, Some(0));
        assert!(cert.witnesses.iter().all(|w| w.ratio == 1.0));
    }

    #[test]
    fn estimate_counterexample() {
        let s = Arc::new(FiniteSpace::cycle(100));
        let spec = EnsembleSpec {
            gaussian: 0,
            adjacency_powers: true,
            permutations: 0,
            seed: 1,
        };
        let cert = onl_estimate(&s, 1, 0.999999, &spec, Some(4)).unwrap();
        assert!(cert.f_r.is_none());
        let ce = cert.counterexample.unwrap();
        assert!(ce.best_ratio < 0.999999);
        assert!(onl_estimate(&s, 1, 1.0, &spec, None).is_err());
    }

    #[test]
    fn ensembles_are_reproducible_and_banded() {
        let s = Arc::new(FiniteSpace::cycle(16));
        let spec = EnsembleSpec {
            gaussian: 2,
            adjacency_powers: true,
            permutations: 3,
            seed: 99,
        };
        let a = sample_ensemble::<f64>(&s, 2, &spec);
        let b = sample_ensemble::<f64>(&s, 2, &spec);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.op.max_abs_diff(&y.op).unwrap(), 0.0);
            assert!(x.op.propagation() <= 2);
        }
        for p in a.iter().filter(|s| s.label.starts_with("perm")) {
            let u = p.op.multiply(&p.op.adjoint()).unwrap();
            assert!(u.max_abs_diff(&p.op.unit_like()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn amplification_examples() {
        let f = ControlFunction::linear(1, 0);
        let a = amplify_constant(0.5, &f, 0.25, AmplifyMode::Verbatim).unwrap();
        assert_eq!(a.n, 2);
        assert_eq!(a.g.to_string(), "k+f(2k)");
        for mode in [AmplifyMode::Root, AmplifyMode::Verbatim] {
            let a = amplify_constant(0.5, &f, 0.5, mode).unwrap();
            assert_eq!(a.n, 1);
            assert_eq!(a.g.to_string(), "f(k)");
            assert!((0..50).all(|k| a.g.eval(k) == f.eval(k)));
        }
        let a = amplify_constant(0.5, &f, 0.9, AmplifyMode::Root).unwrap();
        assert_eq!(a.n, 7);
        assert_eq!(a.g.to_string(), "6k+f(7k)");
        // Oracle: direct scan for the smallest n.
        let n = (1..).find(|&n| 0.5f64.powf(1.0 / n as f64) >= 0.9).unwrap();
        assert_eq!(a.n, n);
        assert!(amplify_constant(0.5, &f, 0.9, AmplifyMode::Verbatim).is_err());
        assert_eq!(a.g.eval(3), Some(18 + 21));
    }

    #[test]
    fn step_functions() {
        let f = ControlFunction::step(vec![(0, 1), (3, 5), (10, 7)]).unwrap();
        assert_eq!(f.eval(0), Some(1));
        assert_eq!(f.eval(2), Some(1));
        assert_eq!(f.eval(3), Some(5));
        assert_eq!(f.eval(100), Some(7));
        let g = ControlFunction::step(vec![(2, 1)]).unwrap();
        assert_eq!(g.eval(1), None);
        assert!(ControlFunction::step(vec![(0, 3), (1, 2)]).is_err());
        assert!(ControlFunction::step(vec![]).is_err());
    }

    #[test]
    fn roe_and_floor() {
        assert_eq!(roe_cover_bound(4, 1, 2).unwrap(), (6, BigUint::from(4096u32)));
        assert_eq!(roe_cover_bound(2, 2, 5).unwrap(), (14, BigUint::from(4096u32)));
        assert_eq!(roe_cover_bound(7, 0, 3).unwrap(), (6, BigUint::from(1u32)));
        assert_eq!(roe_cover_bound(3, 50, 0).unwrap().1, BigUint::from(3u32).pow(300));
        assert!(roe_cover_bound(1, 1, 1).is_err());
        assert_eq!(onl_constant_floor(4).unwrap(), 0.125);
        assert_eq!(onl_constant_floor(1).unwrap(), 0.5);
        assert_eq!(onl_constant_floor(6).unwrap(), 1.0 / 12.0);
    }

    #[test]
    fn lacunary_examples() {
        let l = lacunary_control_radius(&[2], &[400], None).unwrap();
        assert_eq!(l.radii, vec![11]);
        assert_eq!(l.radii_alt, vec![10]);
        assert_eq!(lacunary_control_radius(&[5], &[10], None).unwrap().radii, vec![0]);
        assert!(lacunary_control_radius(&[1, 2], &[3], None).is_err());
        let ms: Vec<u64> = (10..=1000).collect();
        let delta: Vec<u64> = ms.iter().map(|&m| (m as f64).ln().ceil() as u64).collect();
        let l = lacunary_control_radius(&delta, &ms, None).unwrap();
        assert_eq!(l.verdict, Verdict::Increasing);
        assert!(l.recheck());
        let flat = lacunary_control_radius(&[1; 10], &[100; 10], None).unwrap();
        assert_eq!(flat.verdict, Verdict::NotIncreasing);
    }

    #[test]
    fn sup_form() {
        let f = ControlFunction::linear(2, 1);
        // R + 2R + 1 <= 100  =>  R = 33.
        assert_eq!(sup_radius(&f, 100), Some(33));
        assert_eq!(sup_radius(&ControlFunction::linear(0, 200), 100), None);
        let l = lacunary_control_radius(&[1, 1], &[100, 10], Some(&[f.clone(), f])).unwrap();
        assert_eq!(l.sup_radii.unwrap(), vec![Some(33), Some(3)]);
    }

    proptest! {
        #[test]
        fn amplified_dominates(slope in 0u64..5, offset in 0u64..20, n in 1u64..6, k in 0u64..1000) {
            let f = ControlFunction::linear(slope, offset);
            let g = ControlFunction::Amplified { n, inner: Box::new(f.clone()) };
            prop_assert!(g.eval(k).unwrap() >= f.eval(k).unwrap());
        }

        #[test]
        fn radius_steps_up(delta in 1u64..50, ratio in 2u64..500, jump in 19u64..100) {
            let r1 = delta * ratio;
            let r2 = delta * (ratio + jump);
            prop_assert!(control_radius(delta, r2, 2) > control_radius(delta, r1, 2));
        }

        #[test]
        fn root_mode_is_minimal(c in 0.01f64..0.99, t in 0.01f64..0.99) {
            let a = amplify_constant(c, &ControlFunction::linear(1, 0), t, AmplifyMode::Root).unwrap();
            prop_assert!(a.achieved >= t * (1.0 - 1e-12));
            if a.n > 1 {
                prop_assert!(c.powf(1.0 / (a.n - 1) as f64) < t * (1.0 - 1e-12));
            }
        }

        #[test]
        fn ratio_monotone_on_random_band(seed in 0u64..20) {
            let s = Arc::new(FiniteSpace::cycle(20));
            let spec = EnsembleSpec { gaussian: 1, adjacency_powers: false, permutations: 0, seed };
            let op = &sample_ensemble::<f64>(&s, 2, &spec)[0].op;
            let mut prev = 0.0;
            for d in [0, 1, 2, 4, 6, 10] {
                let r = localization_search(op, d, 1e-10).unwrap().ratio;
                prop_assert!(r >= prev - 1e-10);
                prev = r;
            }
            prop_assert!(prev >= 1.0 - 1e-9);
        }
    }
}

//! Localised lifting of operators and group-ring elements through a covering.
//!
//! For a covering `pi: Y -> X` and a window `R`, an operator `T` on `X` with
//! propagation at most `R` lifts to `Phi(T)_{y,y'} = T_{pi y, pi y'}` when
//! `d(y, y') <= R` and zero otherwise. When `Y` is a finite ball standing in
//! for an infinite group, every comparison is made on interior rows, the
//! points `y` with `d(y, x0) + R <= R_big`, whose `R`-ball is complete.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::bandops::{BandOperator, GroupRingElement};
use crate::coverings::{window_verdict, CoveringMap, Verdict, WINDOW_EVIDENCE};
use crate::error::{Error, Result};
use crate::linalg::{column_restricted_top, vec_norm, Matrix};
use crate::scalar::{czero, Real};
use crate::spaces::cayley::GroupLaw;
use crate::spaces::Dist;

/// A covering together with a lifting radius `R <= r_m`.
#[derive(Clone, Copy, Debug)]
pub struct LiftWindow<'a> {
    cover: &'a CoveringMap,
    radius: Dist,
}

impl<'a> LiftWindow<'a> {
    pub fn new(cover: &'a CoveringMap, radius: Dist) -> Result<Self> {
        if radius > cover.injectivity_radius() {
            return Err(Error::pre(format!(
                "window R = {radius} exceeds the injectivity radius {}",
                cover.injectivity_radius()
            )));
        }
        Ok(Self { cover, radius })
    }

    pub fn cover(&self) -> &'a CoveringMap {
        self.cover
    }

    pub fn radius(&self) -> Dist {
        self.radius
    }

    /// Rows whose `R`-ball lies inside the source.
    pub fn interior(&self) -> Vec<usize> {
        self.cover.interior(self.radius)
    }
}

/// The lifting formula with no precondition on propagation.
pub fn lift_raw<T: Real>(t: &BandOperator<T>, cover: &CoveringMap, radius: Dist) -> Result<BandOperator<T>> {
    if **t.space() != **cover.target() {
        return Err(Error::SpaceMismatch);
    }
    let src = cover.source();
    let (n, m, b) = (src.len(), cover.target().len(), t.blocks());
    let mut out = Matrix::zeros(n * b, n * b);
    for y in 0..n {
        for y2 in 0..n {
            if src.dist(y, y2) > radius {
                continue;
            }
            let (x, x2) = (cover.map(y), cover.map(y2));
            for i in 0..b {
                for j in 0..b {
                    out[(i * n + y, j * n + y2)] = t.entry(i * m + x, j * m + x2);
                }
            }
        }
    }
    BandOperator::amplified(Arc::clone(src), b, out)
}

/// `Phi(T)`; errors if `prop(T)` exceeds the window.
pub fn lift_operator<T: Real>(t: &BandOperator<T>, window: &LiftWindow<'_>) -> Result<BandOperator<T>> {
    if t.propagation() > window.radius {
        return Err(Error::PropagationExceedsWindow {
            propagation: t.propagation(),
            window: window.radius,
        });
    }
    lift_raw(t, window.cover, window.radius)
}

/// Inverse of `Phi` on the window grade: each target point is read off at
/// the preimage nearest the basepoint (lowest index on ties).
pub fn push_forward_operator<T: Real>(s: &BandOperator<T>, window: &LiftWindow<'_>) -> Result<BandOperator<T>> {
    let cover = window.cover;
    if **s.space() != **cover.source() {
        return Err(Error::SpaceMismatch);
    }
    let src = cover.source();
    let tgt = cover.target();
    let (n, m, b) = (src.len(), tgt.len(), s.blocks());
    let lifts = centred_lifts(cover, window.radius)?;
    let mut out = Matrix::zeros(m * b, m * b);
    for x in 0..m {
        let y = lifts[x];
        for y2 in src.ball(y, window.radius) {
            let x2 = cover.map(y2);
            for i in 0..b {
                for j in 0..b {
                    out[(i * m + x, j * m + x2)] = s.entry(i * n + y, j * n + y2);
                }
            }
        }
    }
    BandOperator::amplified(Arc::clone(tgt), b, out)
}

/// For each target point, a preimage whose `radius`-ball is complete.
fn centred_lifts(cover: &CoveringMap, radius: Dist) -> Result<Vec<usize>> {
    let src = cover.source();
    let x0 = src.basepoint();
    let admissible = cover.admissible_centres(radius);
    let mut best: Vec<Option<usize>> = vec![None; cover.target().len()];
    for &y in &admissible {
        let slot = &mut best[cover.map(y)];
        match *slot {
            Some(prev) if src.dist(x0, prev) <= src.dist(x0, y) => {}
            _ => *slot = Some(y),
        }
    }
    best.into_iter()
        .enumerate()
        .map(|(x, y)| {
            y.ok_or_else(|| {
                Error::pre(format!(
                    "target point {x} has no preimage with a complete {radius}-ball; enlarge the source ball"
                ))
            })
        })
        .collect()
}

/// `phi(a)`: each coefficient moves to the unique preimage in `B_R(e)`.
pub fn lift_group_ring<T: Real>(a: &GroupRingElement<T>, window: &LiftWindow<'_>) -> Result<GroupRingElement<T>> {
    let cover = window.cover;
    let (ball, quot) = match (cover.source_group(), cover.target_group()) {
        (Some(b), Some(q)) => (b, q),
        _ => return Err(Error::pre("group-ring lifting needs a group covering")),
    };
    if a.group_order() != quot.len() {
        return Err(Error::input("element does not live on the covering's target group"));
    }
    if a.support_radius() > window.radius {
        return Err(Error::SupportTooLarge {
            support: a.support_radius(),
            limit: window.radius,
            limit_name: "window R",
        });
    }
    let src = cover.source();
    let e = ball.identity();
    let mut preimage: BTreeMap<usize, usize> = BTreeMap::new();
    for y in src.ball(e, window.radius) {
        preimage.insert(cover.map(y), y);
    }
    let terms = a
        .coeffs()
        .iter()
        .map(|(&x, &c)| {
            preimage
                .get(&x)
                .map(|&y| (y, c))
                .ok_or_else(|| Error::pre(format!("element {x} has no preimage in the window ball")))
        })
        .collect::<Result<Vec<_>>>()?;
    GroupRingElement::new(ball.as_ref(), terms)
}

/// Result of comparing `Phi(ST)` with `Phi(S) Phi(T)` on interior rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplicativityReport {
    pub window: Dist,
    pub propagation_sum: Dist,
    /// `prop(S) + prop(T) <= R <= r_m`.
    pub admissible: bool,
    pub equal: bool,
    pub max_diff: f64,
    pub interior_size: usize,
    /// First interior row/column where the two sides differ.
    pub witness: Option<DiscrepancyWitness>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscrepancyWitness {
    pub row: usize,
    pub col: usize,
    pub lift_of_product: [f64; 2],
    pub product_of_lifts: [f64; 2],
}

pub const ENTRY_TOL: f64 = 1e-12;

/// Applies the lifting formula at radius `radius` (which may exceed the
/// injectivity radius for negative controls) to `S`, `T` and `ST`.
pub fn local_multiplicativity_check<T: Real>(
    s: &BandOperator<T>,
    t: &BandOperator<T>,
    cover: &CoveringMap,
    radius: Dist,
) -> Result<MultiplicativityReport> {
    let st = s.multiply(t)?;
    let lhs = lift_raw(&st, cover, radius)?;
    let rhs = lift_raw(s, cover, radius)?.multiply(&lift_raw(t, cover, radius)?)?;
    let interior = cover.interior(radius);
    let n = cover.source().len();
    let dim = lhs.dim();
    let mut max_diff = 0.0f64;
    let mut witness = None;
    for blk in 0..s.blocks() {
        for &y in &interior {
            let row = blk * n + y;
            for col in 0..dim {
                let (l, r) = (lhs.entry(row, col), rhs.entry(row, col));
                let d = (l - r).norm().to_f64_lossy();
                if d > max_diff {
                    max_diff = d;
                }
                if d > ENTRY_TOL && witness.is_none() {
                    witness = Some(DiscrepancyWitness {
                        row,
                        col,
                        lift_of_product: [l.re.to_f64_lossy(), l.im.to_f64_lossy()],
                        product_of_lifts: [r.re.to_f64_lossy(), r.im.to_f64_lossy()],
                    });
                }
            }
        }
    }
    let propagation_sum = s.propagation() + t.propagation();
    Ok(MultiplicativityReport {
        window: radius,
        propagation_sum,
        admissible: propagation_sum <= radius && radius <= cover.injectivity_radius(),
        equal: witness.is_none(),
        max_diff,
        interior_size: interior.len(),
        witness,
    })
}

/// Whether an operator on the source commutes with every deck
/// transformation of the covering (vacuously true without deck data).
pub fn is_deck_equivariant<T: Real>(op: &BandOperator<T>, cover: &CoveringMap) -> bool {
    let Some(deck) = cover.deck() else {
        return true;
    };
    let n = cover.source().len();
    deck.iter().all(|g| {
        (0..n).all(|x| (0..n).all(|y| (op.entry(g[x], g[y]) - op.entry(x, y)).norm() <= T::lit(ENTRY_TOL)))
    })
}

/// Norm of the base operator of `a` on the source ball, restricted to the
/// columns that see no truncation.
pub fn interior_norm<T: Real>(a: &GroupRingElement<T>, cover: &CoveringMap, tol: T) -> Result<(T, usize)> {
    let ball = cover
        .source_group()
        .ok_or_else(|| Error::pre("interior norms need a group ball source"))?;
    let op = a.to_band_operator(ball.as_ref())?;
    let cols = a.complete_columns(ball.as_ref())?;
    let (sigma, _) = column_restricted_top(op.matrix(), &cols, tol)?;
    Ok((sigma, cols.len()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileTerm {
    pub m: usize,
    pub r_m: Dist,
    pub admissible: bool,
    pub norm_lift: Option<f64>,
    pub ratio: Option<f64>,
    /// `| ||phi_m(a) phi_m(v)|| - ||a v|| |` for the lower-bound witness.
    pub witness_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormProfile {
    pub support_radius: Dist,
    pub norm_base: f64,
    pub interior_size: usize,
    pub terms: Vec<ProfileTerm>,
    pub tail_len: usize,
    /// Maximum of `norm_lift` over the last `tail_len` admissible terms.
    pub limsup_estimate: f64,
    /// `c_a = ||a v|| / norm_base` for the finite-support witness `v`.
    pub lower_bound_constant: f64,
    pub witness_support_radius: Dist,
    /// `limsup <= norm_base / c` when an ONL constant `c` is supplied.
    pub continuity_bound: Option<ContinuityBound>,
    pub evidence: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityBound {
    pub c: f64,
    pub bound: f64,
    pub holds: bool,
}

impl NormProfile {
    /// CSV with header `m,r_m,norm_lift,norm_base,ratio` (admissible terms).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,r_m,norm_lift,norm_base,ratio\n");
        for t in self.terms.iter().filter(|t| t.admissible) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.m,
                t.r_m,
                t.norm_lift.unwrap_or(f64::NAN),
                self.norm_base,
                t.ratio.unwrap_or(f64::NAN)
            ));
        }
        out
    }
}

fn push_vector<T: Real>(v: &[Complex<T>], support: &[usize], cover: &CoveringMap) -> Vec<Complex<T>> {
    let mut out = vec![czero(); cover.target().len()];
    for (&y, &c) in support.iter().zip(v) {
        let x = cover.map(y);
        out[x] = out[x] + c;
    }
    out
}

fn check_common_source(family: &[CoveringMap]) -> Result<()> {
    let first = family.first().ok_or_else(|| Error::input("covering family is empty"))?;
    if family.iter().any(|c| **c.source() != **first.source()) {
        return Err(Error::input("covering family members have different sources"));
    }
    Ok(())
}

/// Per-term norms of `phi_m(a)` over a family of quotients of a common
/// source ball, the interior base norm, and a lower-bound witness vector.
pub fn limsup_norm_profile<T: Real>(
    a: &GroupRingElement<T>,
    family: &[CoveringMap],
    tol: T,
    tail_len: Option<usize>,
    onl_constant: Option<f64>,
) -> Result<NormProfile> {
    check_common_source(family)?;
    let supp = a.support_radius();
    let admissible: Vec<usize> = (0..family.len())
        .filter(|&m| family[m].injectivity_radius() >= supp && family[m].target_group().is_some())
        .collect();
    if admissible.is_empty() {
        return Err(Error::pre(format!(
            "support radius {supp} exceeds every injectivity radius in the family"
        )));
    }
    let base_cover = &family[0];
    let ball = base_cover
        .source_group()
        .ok_or_else(|| Error::pre("norm profiles need a group ball source"))?;
    let (norm_base, interior_size) = interior_norm(a, base_cover, tol)?;

    // Witness: best vector supported in B_rho(e) with rho + supp <= min r_m.
    let min_r = admissible.iter().map(|&m| family[m].injectivity_radius()).min().unwrap_or(supp);
    let rho = min_r - supp;
    let base_op = a.to_band_operator(ball.as_ref())?;
    let support = ball.space().ball(ball.identity(), rho);
    let (av_norm, v) = column_restricted_top(base_op.matrix(), &support, tol)?;
    let mut v_full = vec![czero(); ball.len()];
    for (&y, &c) in support.iter().zip(&v) {
        v_full[y] = c;
    }
    let av_norm = if a.is_zero() { T::zero() } else { av_norm };
    let lower_bound_constant = if norm_base > T::zero() {
        (av_norm / norm_base).to_f64_lossy()
    } else {
        1.0
    };

    let mut terms = Vec::with_capacity(family.len());
    for (m, cover) in family.iter().enumerate() {
        let r_m = cover.injectivity_radius();
        if !admissible.contains(&m) {
            terms.push(ProfileTerm {
                m,
                r_m,
                admissible: false,
                norm_lift: None,
                ratio: None,
                witness_residual: None,
            });
            continue;
        }
        let op = a.push_forward(cover)?.to_band_operator(cover.target_group().expect("admissible").as_ref())?;
        let norm = op.operator_norm(tol)?;
        let pushed_v = push_vector(&v, &support, cover);
        let lifted_av = vec_norm(&op.matrix().mul_vec(&pushed_v));
        terms.push(ProfileTerm {
            m,
            r_m,
            admissible: true,
            norm_lift: Some(norm.to_f64_lossy()),
            ratio: (norm_base > T::zero()).then(|| (norm / norm_base).to_f64_lossy()),
            witness_residual: Some((lifted_av - av_norm).abs().to_f64_lossy()),
        });
    }
    let adm_norms: Vec<f64> = terms.iter().filter_map(|t| t.norm_lift).collect();
    let tail_len = tail_len.unwrap_or(adm_norms.len().div_ceil(2)).clamp(1, adm_norms.len());
    let limsup_estimate = adm_norms[adm_norms.len() - tail_len..].iter().copied().fold(0.0, f64::max);
    let norm_base = norm_base.to_f64_lossy();
    let continuity_bound = onl_constant.map(|c| {
        let bound = norm_base / c;
        ContinuityBound {
            c,
            bound,
            holds: limsup_estimate <= bound * (1.0 + 1e-9),
        }
    });
    Ok(NormProfile {
        support_radius: supp,
        norm_base,
        interior_size,
        terms,
        tail_len,
        limsup_estimate,
        lower_bound_constant,
        witness_support_radius: rho,
        continuity_bound,
        evidence: WINDOW_EVIDENCE.to_string(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleClassification {
    pub sample: usize,
    pub support_radius: Dist,
    pub norm_base: f64,
    pub norms: Vec<Option<f64>>,
    /// Least term index from which every later admissible term satisfies
    /// `||Phi_n(T)|| <= ||T|| (1 + tol)`.
    pub continuous_from: Option<usize>,
    /// Same with `| ||Phi_n(T)|| - ||T|| | <= tol ||T||`.
    pub isometric_from: Option<usize>,
    /// Same with the relaxed bound `||Phi_n(T)|| <= ||T|| (1 + tol) / c`.
    pub relaxed_from: Option<usize>,
    /// True if some term could not lift this sample.
    pub inadmissible_terms: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuityVerdict {
    Isometric,
    Continuous,
    RelaxedContinuous,
    Neither,
    Inadmissible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusClassification {
    pub radius: Dist,
    pub verdict: ContinuityVerdict,
    pub from_term: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub samples: Vec<SampleClassification>,
    pub per_radius: Vec<RadiusClassification>,
    pub relaxation_constant: Option<f64>,
    pub evidence: String,
}

fn settles_from(ok: &[Option<bool>]) -> Option<usize> {
    // Terms with `None` are skipped; the last admissible term must pass.
    let mut from = None;
    for (i, v) in ok.iter().enumerate() {
        match v {
            Some(true) => {
                if from.is_none() {
                    from = Some(i);
                }
            }
            Some(false) => from = None,
            None => {}
        }
    }
    from
}

/// Classifies the lifting family as asymptotically continuous or isometric
/// on sample elements of the source ball, grouped by support radius.
pub fn continuity_classification<T: Real>(
    family: &[CoveringMap],
    samples: &[GroupRingElement<T>],
    tol: T,
    onl_constant: Option<f64>,
) -> Result<ContinuityReport> {
    if samples.is_empty() {
        return Err(Error::input("no sample elements"));
    }
    check_common_source(family)?;
    let tolf = tol.to_f64_lossy();
    let norm_tol = T::lit(1e-10);
    let mut out = Vec::with_capacity(samples.len());
    for (i, a) in samples.iter().enumerate() {
        let (nb, _) = interior_norm(a, &family[0], norm_tol)?;
        let nb = nb.to_f64_lossy();
        let mut norms = Vec::with_capacity(family.len());
        let mut inadmissible = Vec::new();
        for (m, cover) in family.iter().enumerate() {
            if cover.injectivity_radius() < a.support_radius() || cover.target_group().is_none() {
                inadmissible.push(m);
                norms.push(None);
                continue;
            }
            let op = a.push_forward(cover)?.to_band_operator(cover.target_group().expect("checked").as_ref())?;
            norms.push(Some(op.operator_norm(norm_tol)?.to_f64_lossy()));
        }
        let test = |f: &dyn Fn(f64) -> bool| -> Vec<Option<bool>> { norms.iter().map(|n| n.map(f)).collect() };
        let any_adm = norms.iter().any(Option::is_some);
        let pick = |v: Vec<Option<bool>>| if any_adm { settles_from(&v) } else { None };
        let continuous_from = pick(test(&|n| n <= nb * (1.0 + tolf) + 1e-12));
        let isometric_from = pick(test(&|n| (n - nb).abs() <= tolf * nb + 1e-12));
        let relaxed_from = onl_constant.and_then(|c| pick(test(&|n| n <= nb * (1.0 + tolf) / c + 1e-12)));
        out.push(SampleClassification {
            sample: i,
            support_radius: a.support_radius(),
            norm_base: nb,
            norms,
            continuous_from,
            isometric_from,
            relaxed_from,
            inadmissible_terms: inadmissible,
        });
    }
    let mut radii: Vec<Dist> = out.iter().map(|s| s.support_radius).collect();
    radii.sort_unstable();
    radii.dedup();
    let per_radius = radii
        .into_iter()
        .map(|r| {
            let group: Vec<&SampleClassification> = out.iter().filter(|s| s.support_radius == r).collect();
            let all_inadmissible = group.iter().all(|s| s.norms.iter().all(Option::is_none));
            let worst = |f: &dyn Fn(&SampleClassification) -> Option<usize>| -> Option<usize> {
                group.iter().map(|s| f(s)).try_fold(0usize, |acc, x| x.map(|x| acc.max(x)))
            };
            let (verdict, from_term) = if all_inadmissible {
                (ContinuityVerdict::Inadmissible, None)
            } else if let Some(m) = worst(&|s| s.isometric_from) {
                (ContinuityVerdict::Isometric, Some(m))
            } else if let Some(m) = worst(&|s| s.continuous_from) {
                (ContinuityVerdict::Continuous, Some(m))
            } else if let Some(m) = worst(&|s| s.relaxed_from) {
                (ContinuityVerdict::RelaxedContinuous, Some(m))
            } else {
                (ContinuityVerdict::Neither, None)
            };
            RadiusClassification {
                radius: r,
                verdict,
                from_term,
            }
        })
        .collect();
    Ok(ContinuityReport {
        samples: out,
        per_radius,
        relaxation_constant: onl_constant,
        evidence: WINDOW_EVIDENCE.to_string(),
    })
}

/// Window verdict on the per-term injectivity radii of a family.
pub fn radius_verdict(family: &[CoveringMap]) -> Verdict {
    let r: Vec<u64> = family.iter().map(|c| c.injectivity_radius() as u64).collect();
    window_verdict(&r)
}

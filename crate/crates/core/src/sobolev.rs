//! Weighted `l^2` norms on group rings and empirical rapid-decay constants.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandops::GroupRingElement;
use crate::coverings::CoveringMap;
use crate::error::{Error, Result};
use crate::lifting::{lift_group_ring, LiftWindow};
use crate::linalg::column_restricted_top;
use crate::scalar::Real;
use crate::spaces::cayley::GroupLaw;
use crate::spaces::Dist;

/// Lengths of group elements with `l(e) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthFunction {
    values: Vec<f64>,
    /// Elements `g` with `l(g) != l(g^-1)`.
    pub asymmetric: Vec<usize>,
}

impl LengthFunction {
    /// Word length from the group's marking.
    pub fn word<G: GroupLaw + ?Sized>(group: &G) -> Self {
        Self {
            values: (0..group.len()).map(|g| group.length(g) as f64).collect(),
            asymmetric: Vec::new(),
        }
    }

    /// Arbitrary lengths. Asymmetry is recorded, not rejected.
    pub fn from_values<G: GroupLaw + ?Sized>(group: &G, values: Vec<f64>) -> Result<Self> {
        if values.len() != group.len() {
            return Err(Error::input(format!(
                "{} lengths given for a group of {} elements",
                values.len(),
                group.len()
            )));
        }
        if let Some(g) = values.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::input(format!("length of element {g} is not a nonnegative number")));
        }
        if values[group.identity()] != 0.0 {
            return Err(Error::input("the identity must have length 0"));
        }
        let asymmetric = (0..values.len())
            .filter(|&g| group.inv(g).is_some_and(|h| values[h] != values[g]))
            .collect();
        Ok(Self { values, asymmetric })
    }

    pub fn get(&self, g: usize) -> f64 {
        self.values[g]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pairs `(g, h)` with `l(gh) > l(g) + l(h)`, where `gh` exists.
    pub fn subadditivity_violations<G: GroupLaw + ?Sized>(&self, group: &G) -> Vec<(usize, usize)> {
        let n = group.len();
        let mut out = Vec::new();
        for g in 0..n {
            for h in 0..n {
                if let Some(gh) = group.mul(g, h) {
                    if self.values[gh] > self.values[g] + self.values[h] + 1e-12 {
                        out.push((g, h));
                    }
                }
            }
        }
        out
    }
}

/// `sqrt(sum_g |a_g|^2 (1 + l(g))^(2s))`.
pub fn sobolev_norm<T: Real>(a: &GroupRingElement<T>, s: f64, l: &LengthFunction) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::input(format!("Sobolev exponent {s} must be nonnegative")));
    }
    if a.group_order() != l.len() {
        return Err(Error::input("length function and element live on different groups"));
    }
    let sum: f64 = a
        .coeffs()
        .iter()
        .map(|(&g, c)| c.norm_sqr().to_f64_lossy() * (1.0 + l.get(g)).powf(2.0 * s))
        .sum();
    Ok(sum.sqrt())
}

/// Operator norm of right convolution by `a`, restricted to the columns that
/// see no truncation when the group is a finite ball.
pub fn regular_norm<T: Real, G: GroupLaw + ?Sized>(a: &GroupRingElement<T>, group: &G) -> Result<f64> {
    let op = a.to_band_operator(group)?;
    let cols = a.complete_columns(group)?;
    let tol = if T::epsilon() > T::lit(1e-10) { T::lit(1e-6) } else { T::lit(1e-12) };
    Ok(column_restricted_top(op.matrix(), &cols, tol)?.0.to_f64_lossy())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RdRow {
    pub sample_id: usize,
    pub op_norm: f64,
    pub sobolev_norm: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RdReport {
    pub s: f64,
    pub seed: Option<u64>,
    pub rows: Vec<RdRow>,
    /// Largest ratio: a lower bound for the true constant.
    pub constant: f64,
    pub skipped_zero: usize,
    pub evidence: String,
}

impl RdReport {
    /// CSV with header `sample_id,op_norm,sobolev_norm,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,op_norm,sobolev_norm,ratio\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.sample_id, r.op_norm, r.sobolev_norm, r.ratio));
        }
        out
    }
}

pub const RD_EVIDENCE: &str = "maximum over samples, an empirical lower bound for the rapid-decay constant";

/// `max ||a||_op / ||a||_{2,s}` over the samples; zero elements are skipped.
pub fn rd_constant_estimate<T: Real, G: GroupLaw + ?Sized>(
    samples: &[GroupRingElement<T>],
    group: &G,
    s: f64,
    l: &LengthFunction,
    seed: Option<u64>,
) -> Result<RdReport> {
    if samples.is_empty() {
        return Err(Error::input("no samples"));
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (i, a) in samples.iter().enumerate() {
        let sob = sobolev_norm(a, s, l)?;
        if sob == 0.0 {
            skipped += 1;
            continue;
        }
        let op = regular_norm(a, group)?;
        rows.push(RdRow {
            sample_id: i,
            op_norm: op,
            sobolev_norm: sob,
            ratio: op / sob,
        });
    }
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(RdReport {
        s,
        seed,
        rows,
        constant,
        skipped_zero: skipped,
        evidence: RD_EVIDENCE.to_string(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsometryCheck {
    pub source_norm: f64,
    pub lifted_norm: f64,
    pub residual: f64,
    pub isometric: bool,
}

pub const ISOMETRY_TOL: f64 = 1e-12;

/// Compares `||a||_{2,s}` on the quotient with the norm of its lift, each
/// with word length in its own group.
pub fn lift_isometry_check<T: Real>(a: &GroupRingElement<T>, window: &LiftWindow<'_>, s: f64) -> Result<IsometryCheck> {
    let cover = window.cover();
    let (ball, quot) = match (cover.source_group(), cover.target_group()) {
        (Some(b), Some(q)) => (b, q),
        _ => return Err(Error::pre("isometry checks need a group covering")),
    };
    let lifted = lift_group_ring(a, window)?;
    let source_norm = sobolev_norm(a, s, &LengthFunction::word(quot.as_ref()))?;
    let lifted_norm = sobolev_norm(&lifted, s, &LengthFunction::word(ball.as_ref()))?;
    let residual = (source_norm - lifted_norm).abs();
    Ok(IsometryCheck {
        source_norm,
        lifted_norm,
        residual,
        isometric: residual <= ISOMETRY_TOL,
    })
}

/// Random elements supported in `B_radius(e)`: up to `max_terms` distinct
/// support points with complex Gaussian coefficients.
pub fn sample_elements<G: GroupLaw + ?Sized>(
    group: &G,
    radius: Dist,
    count: usize,
    max_terms: usize,
    seed: u64,
) -> Result<Vec<GroupRingElement<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball = group.space().ball(group.identity(), radius);
    let max_terms = max_terms.clamp(1, ball.len());
    (0..count)
        .map(|_| {
            let k = rng.random_range(1..=max_terms);
            let mut pts = ball.clone();
            for i in 0..k {
                let j = rng.random_range(i..pts.len());
                pts.swap(i, j);
            }
            let terms = pts[..k].iter().map(|&g| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                (g, Complex::new(re, im))
            });
            GroupRingElement::new(group, terms.collect::<Vec<_>>())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RdChainTerm {
    pub m: usize,
    pub admissible: bool,
    pub op_norm: Option<f64>,
    pub sobolev_norm: Option<f64>,
    /// `||a_m|| <= C ||a_m||_{2,s}`
    pub rd_holds: Option<bool>,
    /// `| ||a_m||_{2,s} - ||a||_{2,s} |`
    pub isometry_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RdChain {
    pub constant: f64,
    pub s: f64,
    pub base_op_norm: f64,
    pub base_sobolev_norm: f64,
    pub terms: Vec<RdChainTerm>,
    /// `||a|| <= C ||a||_{2,s}` on the base ball.
    pub base_holds: bool,
    /// Every admissible term satisfies both links of the chain.
    pub chain_holds: bool,
}

/// Checks the termwise chain `||a_m|| <= C ||a_m||_{2,s} = C ||a||_{2,s}` over
/// a family of quotients of a common source ball, and the resulting base
/// inequality.
pub fn rd_chain_check<T: Real>(
    a: &GroupRingElement<T>,
    family: &[CoveringMap],
    constant: f64,
    s: f64,
) -> Result<RdChain> {
    let first = family.first().ok_or_else(|| Error::input("covering family is empty"))?;
    let ball = first
        .source_group()
        .ok_or_else(|| Error::pre("the chain needs a group ball source"))?;
    let base_sob = sobolev_norm(a, s, &LengthFunction::word(ball.as_ref()))?;
    let base_op = regular_norm(a, ball.as_ref())?;
    let slack = 1.0 + 1e-9;
    let mut terms = Vec::new();
    let mut chain_holds = true;
    for (m, cover) in family.iter().enumerate() {
        let quot = cover.target_group();
        let admissible = quot.is_some() && cover.injectivity_radius() >= a.support_radius();
        if !admissible {
            terms.push(RdChainTerm {
                m,
                admissible,
                op_norm: None,
                sobolev_norm: None,
                rd_holds: None,
                isometry_residual: None,
            });
            continue;
        }
        let quot = quot.expect("admissible");
        let am = a.push_forward(cover)?;
        let op = regular_norm(&am, quot.as_ref())?;
        let sob = sobolev_norm(&am, s, &LengthFunction::word(quot.as_ref()))?;
        let rd = op <= constant * sob * slack;
        let res = (sob - base_sob).abs();
        chain_holds &= rd && res <= ISOMETRY_TOL;
        terms.push(RdChainTerm {
            m,
            admissible,
            op_norm: Some(op),
            sobolev_norm: Some(sob),
            rd_holds: Some(rd),
            isometry_residual: Some(res),
        });
    }
    Ok(RdChain {
        constant,
        s,
        base_op_norm: base_op,
        base_sobolev_norm: base_sob,
        terms,
        base_holds: base_op <= constant * base_sob * slack,
        chain_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverings::{quotient_covering, MarkedGroupBall};
    use crate::scalar::creal;
    use crate::spaces::cayley::{cyclic, torus_group};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn norm_examples() {
        let q = cyclic(12).unwrap();
        let l = LengthFunction::word(&q);
        let e = GroupRingElement::<f64>::delta(&q, 0).unwrap();
        for s in [0.0, 1.0, 3.5] {
            assert_eq!(sobolev_norm(&e, s, &l).unwrap(), 1.0);
        }
        let g3 = q.eval_word(&[1, 1, 1]).unwrap();
        let d3 = GroupRingElement::<f64>::delta(&q, g3).unwrap();
        assert_eq!(sobolev_norm(&d3, 1.0, &l).unwrap(), 4.0);
        let g1 = q.marking()[0];
        let two = GroupRingElement::<f64>::new(&q, [(0, creal(1.0)), (g1, creal(1.0))]).unwrap();
        assert!((sobolev_norm(&two, 1.0, &l).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(sobolev_norm(&two, -1.0, &l).is_err());
    }

    #[test]
    fn custom_lengths() {
        let q = cyclic(5).unwrap();
        let mut v: Vec<f64> = (0..5).map(|g| LengthFunction::word(&q).get(g)).collect();
        let l = LengthFunction::from_values(&q, v.clone()).unwrap();
        assert!(l.asymmetric.is_empty());
        v[q.marking()[0]] = 7.0;
        let skew = LengthFunction::from_values(&q, v).unwrap();
        assert!(!skew.asymmetric.is_empty());
        assert!(LengthFunction::from_values(&q, vec![1.0; 5]).is_err());
        assert!(LengthFunction::word(&q).subadditivity_violations(&q).is_empty());
        assert!(!skew.subadditivity_violations(&q).is_empty());
    }

    #[test]
    fn rd_examples() {
        let q = cyclic(10).unwrap();
        let l = LengthFunction::word(&q);
        let e = GroupRingElement::<f64>::delta(&q, 0).unwrap();
        let rep = rd_constant_estimate(&[e], &q, 1.0, &l, None).unwrap();
        assert!((rep.constant - 1.0).abs() < 1e-12);
        let g = q.marking()[0];
        let gi = q.inv_idx(g);
        let adj = GroupRingElement::<f64>::new(&q, [(g, creal(1.0)), (gi, creal(1.0))]).unwrap();
        let rep = rd_constant_estimate(&[adj], &q, 0.0, &l, Some(3)).unwrap();
        assert!((rep.constant - 2f64.sqrt()).abs() < 1e-10);
        assert!(rep.to_csv().starts_with("sample_id,op_norm,sobolev_norm,ratio\n"));
        assert!(rd_constant_estimate::<f64, _>(&[], &q, 0.0, &l, None).is_err());
        let z = GroupRingElement::<f64>::new(&q, []).unwrap();
        assert_eq!(rd_constant_estimate(&[z], &q, 0.0, &l, None).unwrap().skipped_zero, 1);
    }

    fn z12() -> (Arc<MarkedGroupBall>, crate::coverings::CoveringMap) {
        let ball = Arc::new(MarkedGroupBall::new(1, 10).unwrap());
        let c = quotient_covering(&ball, &Arc::new(cyclic(12).unwrap())).unwrap();
        (ball, c)
    }

    #[test]
    fn isometry_examples() {
        let (_, c) = z12();
        let q = c.target_group().unwrap();
        let w = LiftWindow::new(&c, 3).unwrap();
        let e = GroupRingElement::<f64>::delta(q.as_ref(), 0).unwrap();
        let r = lift_isometry_check(&e, &w, 2.0).unwrap();
        assert_eq!(r.residual, 0.0);
        let g3 = q.eval_word(&[1, 1, 1]).unwrap();
        let a = GroupRingElement::<f64>::new(q.as_ref(), [(0, creal(1.0)), (g3, Complex::new(0.5, -2.0))]).unwrap();
        let r = lift_isometry_check(&a, &w, 1.5).unwrap();
        assert!(r.isometric);
        // Coefficientwise oracle: 1 + |0.5 - 2i|^2 * 4^3.
        assert!((r.source_norm - (1.0f64 + 4.25 * 64.0).sqrt()).abs() < 1e-12);
        let g4 = q.eval_word(&[1, 1, 1, 1]).unwrap();
        let far = GroupRingElement::<f64>::delta(q.as_ref(), g4).unwrap();
        assert!(lift_isometry_check(&far, &w, 1.0).is_err());
    }

    #[test]
    fn chain_on_torus_family() {
        let ball = Arc::new(MarkedGroupBall::new(1, 30).unwrap());
        let fam: Vec<_> = [10u64, 16, 24]
            .iter()
            .map(|&n| quotient_covering(&ball, &Arc::new(cyclic(n).unwrap())).unwrap())
            .collect();
        let elems = sample_elements(ball.as_ref(), 3, 20, 4, 11).unwrap();
        // On Z, ||a||_op <= ||a||_1 <= sqrt(sum_{|g| <= 3} (1+|g|)^-2) ||a||_{2,1}.
        let c: f64 = (1.0 + 2.0 * (1..=3).map(|k| 1.0 / ((1 + k) * (1 + k)) as f64).sum::<f64>()).sqrt();
        for a in &elems {
            let chain = rd_chain_check(a, &fam, c, 1.0).unwrap();
            assert!(chain.chain_holds, "{chain:?}");
            assert!(chain.base_holds);
        }
        let t = torus_group(5).unwrap();
        assert!(sample_elements(&t, 2, 5, 3, 1).unwrap().iter().all(|a| a.support_radius() <= 2));
    }

    proptest! {
        #[test]
        fn monotone_in_s(seed in 0u64..500, s1 in 0.0f64..3.0, ds in 0.0f64..2.0) {
            let q = cyclic(9).unwrap();
            let l = LengthFunction::word(&q);
            let a = &sample_elements(&q, 4, 1, 5, seed).unwrap()[0];
            prop_assert!(sobolev_norm(a, s1 + ds, &l).unwrap() >= sobolev_norm(a, s1, &l).unwrap());
            prop_assert!((sobolev_norm(a, 0.0, &l).unwrap() - a.l2_norm()).abs() < 1e-12);
        }

        #[test]
        fn lift_is_isometric(seed in 0u64..500, s in 0.0f64..4.0) {
            let (_, c) = z12();
            let q = c.target_group().unwrap();
            let w = LiftWindow::new(&c, 3).unwrap();
            let a = &sample_elements(q.as_ref(), 3, 1, 7, seed).unwrap()[0];
            prop_assert!(lift_isometry_check(a, &w, s).unwrap().isometric);
        }
    }
}

//! Weight functions attached to a splitting `E = ⊕_j E_j` of a bundle over a
//! curve, and the extremal affine function of a weighted polytope.
//!
//! Weights may carry simple poles `c/L` along facets. They are only ever
//! integrated after multiplication by a density divisible by `L`, so every
//! Donaldson–Futaki evaluation stays exact.

use crate::affine::AffineFunction;
use crate::functionals::TwoPiScaled;
use crate::integrate::{integrate_boundary, integrate_polynomial};
use crate::linalg::solve;
use crate::poly::Polynomial;
use crate::polytope::LabeledPolytope;
use crate::rational::{serde_rational, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightError {
    #[error("pole along {0} is not cancelled by the density")]
    PoleNotCancelled(AffineFunction),
    #[error("the extremal affine function has not been solved for")]
    UnresolvedExtremal,
    #[error("the weight has an opaque part with no polynomial form")]
    OpaqueTerm,
    #[error("c = {c} is not above every slope (max {max_slope})")]
    KaehlerConeViolation { c: Rational, max_slope: Rational },
    #[error("invalid block data: {0}")]
    InvalidBlocks(String),
    #[error("the Gram matrix of the measure is singular")]
    SingularGram,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// `coef / denominator`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoleTerm {
    pub coef: Rational,
    pub denominator: AffineFunction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtremalSlot {
    Absent,
    Unresolved,
    Resolved(AffineFunction),
}

pub type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `poly + ℓ_ext + Σ coef_k / L_k + opaque`.
#[derive(Clone)]
pub struct WeightExpr {
    pub poly: Polynomial,
    pub pole_terms: Vec<PoleTerm>,
    pub extremal: ExtremalSlot,
    pub opaque: Option<Oracle>,
}

impl fmt::Debug for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightExpr")
            .field("poly", &self.poly)
            .field("pole_terms", &self.pole_terms)
            .field("extremal", &self.extremal)
            .field("opaque", &self.opaque.is_some())
            .finish()
    }
}

impl WeightExpr {
    pub fn polynomial(poly: Polynomial) -> Self {
        Self {
            poly,
            pole_terms: Vec::new(),
            extremal: ExtremalSlot::Absent,
            opaque: None,
        }
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        Self::polynomial(Polynomial::constant(dim, c))
    }

    pub fn opaque(dim: usize, f: Oracle) -> Self {
        let mut w = Self::polynomial(Polynomial::zero(dim));
        w.opaque = Some(f);
        w
    }

    pub fn dim(&self) -> usize {
        self.poly.dim()
    }

    pub fn with_pole(mut self, coef: Rational, denominator: AffineFunction) -> Self {
        self.pole_terms.push(PoleTerm { coef, denominator });
        self
    }

    pub fn resolve(&mut self, l_ext: AffineFunction) {
        self.extremal = ExtremalSlot::Resolved(l_ext);
    }

    pub fn extremal_function(&self) -> Option<&AffineFunction> {
        match &self.extremal {
            ExtremalSlot::Resolved(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.opaque.is_none()
    }

    /// `w · density` as a polynomial, dividing each pole into the density.
    pub fn paired_with(&self, density: &Polynomial) -> Result<Polynomial, WeightError> {
        if self.opaque.is_some() {
            return Err(WeightError::OpaqueTerm);
        }
        let mut out = &self.poly * density;
        match &self.extremal {
            ExtremalSlot::Absent => {}
            ExtremalSlot::Unresolved => return Err(WeightError::UnresolvedExtremal),
            ExtremalSlot::Resolved(l) => out = &out + &(&Polynomial::from_affine(l) * density),
        }
        for t in &self.pole_terms {
            let q = density
                .div_affine(&t.denominator)
                .ok_or_else(|| WeightError::PoleNotCancelled(t.denominator.clone()))?;
            out = &out + &q.scale(&t.coef);
        }
        Ok(out)
    }

    /// Pole-cancelled pairing with the extremal slot left out:
    /// `(w − ℓ_ext) · density`.
    pub fn paired_without_extremal(&self, density: &Polynomial) -> Result<Polynomial, WeightError> {
        let mut w = self.clone();
        w.extremal = ExtremalSlot::Absent;
        w.paired_with(density)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let mut v = self.poly.eval_f64(x);
        if let ExtremalSlot::Resolved(l) = &self.extremal {
            v += l.eval_f64(x);
        }
        for t in &self.pole_terms {
            v += crate::rational::to_f64(&t.coef) / t.denominator.eval_f64(x);
        }
        if let Some(o) = &self.opaque {
            v += o(x);
        }
        v
    }

    pub fn add_polynomial(&self, q: &Polynomial) -> Self {
        let mut w = self.clone();
        w.poly = &w.poly + q;
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub rank: u32,
    pub degree: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub genus: u32,
    pub blocks: Vec<BlockSpec>,
    #[serde(with = "serde_rational")]
    pub c: Rational,
    #[serde(default = "TwoPiScaled::two_pi")]
    pub base_volume: TwoPiScaled,
}

impl BundleSpec {
    pub fn new(genus: u32, blocks: &[(u32, i64)], c: Rational) -> Self {
        Self {
            genus,
            blocks: blocks
                .iter()
                .map(|&(rank, degree)| BlockSpec { rank, degree })
                .collect(),
            c,
            base_volume: TwoPiScaled::two_pi(),
        }
    }

    pub fn ell(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn ranks(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.rank).collect()
    }

    /// `n = Σ d_j − 1`, the fiber dimension.
    pub fn fiber_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.rank as usize).sum::<usize>() - 1
    }

    pub fn slopes(&self) -> Vec<Rational> {
        self.blocks
            .iter()
            .map(|b| Rational::new(BigInt::from(b.degree), BigInt::from(b.rank)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockData {
    pub index: usize,
    pub rank: u32,
    pub degree: i64,
    pub slope: Rational,
    pub label: AffineFunction,
}

pub fn validate_ranks(ranks: &[u32]) -> Result<(), WeightError> {
    if ranks.len() < 2 {
        return Err(WeightError::InvalidBlocks("at least two blocks are needed".into()));
    }
    if ranks.contains(&0) {
        return Err(WeightError::InvalidBlocks("ranks must be positive".into()));
    }
    Ok(())
}

/// `2d(d−1)`, the scalar curvature of Fubini–Study on `ℙ^{d−1}`.
pub fn fubini_study_scalar(d: u32) -> Rational {
    Rational::from_integer(BigInt::from(2 * d * (d - 1)))
}

/// `p = ∏ L_j^{d_j−1}` and the terms `−2d_j(d_j−1)/L_j` for `d_j ≥ 2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiberWeights {
    pub ranks: Vec<u32>,
    pub p: Polynomial,
    pub corrections: Vec<PoleTerm>,
}

impl FiberWeights {
    /// `ŵ = w − Σ_{d_j≥2} 2d_j(d_j−1)/L_j`.
    pub fn w_hat(&self, w: &WeightExpr) -> WeightExpr {
        let mut out = w.clone();
        out.pole_terms.extend(self.corrections.iter().cloned());
        out
    }
}

pub fn fiber_weights(ranks: &[u32]) -> Result<FiberWeights, WeightError> {
    validate_ranks(ranks)?;
    let ell = ranks.len() - 1;
    let delta = LabeledPolytope::standard_simplex(ell);
    let mut p = Polynomial::one(ell);
    let mut corrections = Vec::new();
    for (j, &d) in ranks.iter().enumerate() {
        let l = &delta.labels()[j];
        p = &p * &Polynomial::from_affine(l).pow(d - 1);
        if d >= 2 {
            corrections.push(PoleTerm {
                coef: -fubini_study_scalar(d),
                denominator: l.clone(),
            });
        }
    }
    Ok(FiberWeights {
        ranks: ranks.to_vec(),
        p,
        corrections,
    })
}

/// Weights of the bundle problem on the standard simplex.
#[derive(Clone, Debug)]
pub struct BundleWeights {
    pub blocks: Vec<BlockData>,
    pub fiber: FiberWeights,
    pub p_bar: AffineFunction,
    /// `p · p̄`.
    pub density: Polynomial,
    /// `ℓ_ext − Σ 2d_j(d_j−1)/L_j − 4(1−g)/p̄`.
    pub w_bar: WeightExpr,
}

impl BundleWeights {
    /// Right-hand sides `(p p̄, Σ 2d_j(d_j−1)(p/L_j) p̄ + 4(1−g) p)` of the
    /// extremal equation `∫ g ℓ_ext p p̄ = 2∫_∂ g p p̄ dσ + ∫ g · rhs`.
    pub fn extremal_rhs(&self) -> (Polynomial, Polynomial) {
        let rest = self
            .w_bar
            .paired_without_extremal(&self.density)
            .expect("poles cancel by construction");
        (self.density.clone(), -&rest)
    }

    pub fn p_bar_min(&self) -> Rational {
        LabeledPolytope::standard_simplex(self.p_bar.dim())
            .vertices()
            .iter()
            .map(|v| self.p_bar.eval(v))
            .min()
            .expect("nonempty")
    }

    pub fn solve(&mut self) -> Result<AffineFunction, WeightError> {
        let delta = LabeledPolytope::standard_simplex(self.p_bar.dim());
        let (rb, ri) = self.extremal_rhs();
        let l = solve_extremal(&delta, &self.density, &rb, &ri)?;
        self.w_bar.resolve(l.clone());
        Ok(l)
    }
}

pub fn bundle_weights(spec: &BundleSpec) -> Result<BundleWeights, WeightError> {
    let ranks = spec.ranks();
    let fiber = fiber_weights(&ranks)?;
    let ell = spec.ell();
    let delta = LabeledPolytope::standard_simplex(ell);
    let slopes = spec.slopes();
    let max_slope = slopes.iter().max().expect("nonempty").clone();
    if spec.c <= max_slope {
        return Err(WeightError::KaehlerConeViolation {
            c: spec.c.clone(),
            max_slope,
        });
    }
    let blocks: Vec<BlockData> = spec
        .blocks
        .iter()
        .enumerate()
        .map(|(j, b)| BlockData {
            index: j,
            rank: b.rank,
            degree: b.degree,
            slope: slopes[j].clone(),
            label: delta.labels()[j].clone(),
        })
        .collect();
    let mut p_bar = AffineFunction::constant_fn(ell, spec.c.clone());
    for b in &blocks {
        p_bar = p_bar.sub(&b.label.scale(&b.slope));
    }
    let density = &fiber.p * &Polynomial::from_affine(&p_bar);
    let mut w_bar = WeightExpr::polynomial(Polynomial::zero(ell));
    w_bar.extremal = ExtremalSlot::Unresolved;
    w_bar.pole_terms.extend(fiber.corrections.iter().cloned());
    let g = Rational::from_integer(BigInt::from(spec.genus));
    let coef = Rational::from_integer(BigInt::from(-4)) * (Rational::one() - g);
    if !coef.is_zero() {
        w_bar = w_bar.with_pole(coef, p_bar.clone());
    }
    Ok(BundleWeights {
        blocks,
        fiber,
        p_bar,
        density,
        w_bar,
    })
}

/// Gram matrix `∫ g_a g_b · measure` on the basis `1, x_1, …, x_ℓ`.
pub fn gram_matrix(p: &LabeledPolytope, measure: &Polynomial) -> Vec<Vec<Rational>> {
    let n = p.dim();
    let basis: Vec<Polynomial> = std::iter::once(Polynomial::one(n))
        .chain((0..n).map(|k| Polynomial::variable(n, k)))
        .collect();
    let mut g = vec![vec![Rational::zero(); n + 1]; n + 1];
    for a in 0..=n {
        for b in a..=n {
            let v = integrate_polynomial(p, &(&(&basis[a] * &basis[b]) * measure))
                .expect("dimensions agree");
            g[a][b] = v.clone();
            g[b][a] = v;
        }
    }
    g
}

/// The affine `ℓ` with
/// `∫ g ℓ · measure dx = 2∫_∂ g · rhs_boundary dσ + ∫ g · rhs_interior dx`
/// for every affine `g`.
pub fn solve_extremal(
    p: &LabeledPolytope,
    measure: &Polynomial,
    rhs_boundary: &Polynomial,
    rhs_interior: &Polynomial,
) -> Result<AffineFunction, WeightError> {
    let n = p.dim();
    for q in [measure, rhs_boundary, rhs_interior] {
        if q.dim() != n {
            return Err(WeightError::DimensionMismatch {
                expected: n,
                found: q.dim(),
            });
        }
    }
    let gram = gram_matrix(p, measure);
    let basis: Vec<Polynomial> = std::iter::once(Polynomial::one(n))
        .chain((0..n).map(|k| Polynomial::variable(n, k)))
        .collect();
    let two = Rational::from_integer(BigInt::from(2));
    let rhs: Vec<Rational> = basis
        .iter()
        .map(|g| {
            let b = integrate_boundary(p, &(g * rhs_boundary)).expect("dimensions agree").total;
            let i = integrate_polynomial(p, &(g * rhs_interior)).expect("dimensions agree");
            &two * b + i
        })
        .collect();
    let c = solve(&gram, &rhs).ok_or(WeightError::SingularGram)?;
    Ok(AffineFunction::new(c[1..].to_vec(), c[0].clone()))
}

/// Leading principal minors of a symmetric matrix are all positive.
pub fn is_positive_definite(m: &[Vec<Rational>]) -> bool {
    (1..=m.len()).all(|k| {
        let sub: Vec<Vec<Rational>> = m[..k].iter().map(|r| r[..k].to_vec()).collect();
        crate::linalg::determinant(&sub).is_positive()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn x1() -> Polynomial {
        Polynomial::variable(1, 0)
    }

    #[test]
    fn fiber_examples() {
        let fw = fiber_weights(&[1, 1]).unwrap();
        assert_eq!(fw.p, Polynomial::one(1));
        assert!(fw.corrections.is_empty());

        let fw = fiber_weights(&[2, 2]).unwrap();
        let one_minus = &Polynomial::one(1) - &x1();
        assert_eq!(fw.p, &one_minus * &x1());
        let w = fw.w_hat(&WeightExpr::constant(1, int(24)));
        let paired = w.paired_with(&fw.p).unwrap();
        let expected = &(&fw.p.scale(&int(24)) - &x1().scale(&int(4))) - &one_minus.scale(&int(4));
        assert_eq!(paired, expected);

        let fw = fiber_weights(&[3, 1]).unwrap();
        assert_eq!(fw.p, one_minus.pow(2));
        assert_eq!(fw.corrections[0].coef, int(-12));
        let w = fw.w_hat(&WeightExpr::polynomial(x1()));
        let paired = w.paired_with(&fw.p).unwrap();
        assert_eq!(paired, &(&x1() * &one_minus.pow(2)) - &one_minus.scale(&int(12)));
    }

    #[test]
    fn uncancelled_pole() {
        let fw = fiber_weights(&[2, 1]).unwrap();
        let w = fw.w_hat(&WeightExpr::constant(1, int(1)));
        assert!(matches!(
            w.paired_with(&Polynomial::one(1)),
            Err(WeightError::PoleNotCancelled(_))
        ));
    }

    #[test]
    fn bundle_examples() {
        let bw = bundle_weights(&BundleSpec::new(0, &[(1, 0), (1, 1)], int(2))).unwrap();
        assert_eq!(bw.p_bar, AffineFunction::from_integers(&[-1], int(2)));
        assert_eq!(bw.p_bar_min(), int(1));
        let bw = bundle_weights(&BundleSpec::new(3, &[(1, 0), (1, 0)], int(1))).unwrap();
        assert_eq!(bw.p_bar, AffineFunction::constant_fn(1, int(1)));
        assert!(matches!(
            bundle_weights(&BundleSpec::new(0, &[(1, 0), (1, 3)], int(2))),
            Err(WeightError::KaehlerConeViolation { .. })
        ));
    }

    #[test]
    fn extremal_examples() {
        let i = LabeledPolytope::standard_simplex(1);
        let one = Polynomial::one(1);
        let l = solve_extremal(&i, &one, &one, &Polynomial::zero(1)).unwrap();
        assert_eq!(l, AffineFunction::constant_fn(1, int(4)));
        let t = LabeledPolytope::standard_simplex(2);
        let one2 = Polynomial::one(2);
        let l = solve_extremal(&t, &one2, &one2, &Polynomial::zero(2)).unwrap();
        assert_eq!(l, AffineFunction::constant_fn(2, int(12)));

        let mut bw = bundle_weights(&BundleSpec::new(0, &[(1, 0), (1, 1)], int(2))).unwrap();
        let (rb, ri) = bw.extremal_rhs();
        assert_eq!(ri, Polynomial::constant(1, int(4)));
        assert_eq!(rb, bw.density);
        let l = bw.solve().unwrap();
        assert_eq!(l, AffineFunction::new(vec![rat(-48, 13)], rat(108, 13)));
        let paired = bw.w_bar.paired_with(&bw.density).unwrap();
        let expected = &(&Polynomial::from_affine(&l) * &bw.density) - &Polynomial::constant(1, int(4));
        assert_eq!(paired, expected);
    }

    #[test]
    fn unresolved_and_singular() {
        let bw = bundle_weights(&BundleSpec::new(0, &[(1, 0), (1, 1)], int(2))).unwrap();
        assert_eq!(
            bw.w_bar.paired_with(&bw.density),
            Err(WeightError::UnresolvedExtremal)
        );
        let i = LabeledPolytope::standard_simplex(1);
        let z = Polynomial::zero(1);
        assert_eq!(solve_extremal(&i, &z, &z, &z), Err(WeightError::SingularGram));
        assert!(is_positive_definite(&gram_matrix(&i, &Polynomial::one(1))));
    }
}

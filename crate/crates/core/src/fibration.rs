//! The lifted simplex `Δ̂` of `ℙ(⊕_j ℂ^{d_j})` over the standard simplex `Δ`,
//! its fiber `Δ_B = ∏_{d_j≥2} Δ_j`, and exact checks of the measure and
//! functional transfer between them.
//!
//! Hatted coordinates are `X̂ = (x_1, …, x_ℓ, x̂^j_1, …, x̂^j_{d_j−1}, …)` over
//! the blocks with `d_j ≥ 2`, in block order; `x̂^j = L_j(x) x^j` where `x^j`
//! are coordinates on `Δ_j`.

use crate::affine::AffineFunction;
use crate::functionals::{futaki, FunctionalError, TwoPiScaled};
use crate::integrate::{
    integrate_cell_face, integrate_pl_product, integrate_pl_product_facet, integrate_polynomial,
    IntegrationError, Region,
};
use crate::pl::{PLConvexFunction, PlError};
use crate::poly::Polynomial;
use crate::polytope::LabeledPolytope;
use crate::rational::{factorial, serde_rational, Rational};
use crate::weights::{bundle_weights, fiber_weights, BundleSpec, BundleWeights, FiberWeights, WeightError, WeightExpr};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiberError {
    #[error("the function is not constant along the fibers of Δ̂ → Δ")]
    PullbackNotConstantAlongFibers,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Pl(#[from] PlError),
}

/// A block with `d_j ≥ 2`: its simplex `Δ_j` and where its coordinates sit.
#[derive(Clone, Debug)]
pub struct FiberBlock {
    pub j: usize,
    pub rank: u32,
    /// Offset of `x̂^j_1` in hatted coordinates (and of `x^j_1` in `(x, x_B)`).
    pub offset: usize,
    pub simplex: LabeledPolytope,
}

#[derive(Clone, Debug)]
pub struct FiberModel {
    pub ranks: Vec<u32>,
    pub delta: LabeledPolytope,
    pub delta_hat: LabeledPolytope,
    /// `(j, i)` for each label of `Δ̂`; `i = 0` is `L_j − Σ_i x̂^j_i` (or `L_j`
    /// when `d_j = 1`) and `i ≥ 1` is `x̂^j_i`.
    pub hat_labels: Vec<(usize, usize)>,
    pub blocks: Vec<FiberBlock>,
    pub vol_b: Rational,
    pub weights: FiberWeights,
}

impl FiberModel {
    pub fn ell(&self) -> usize {
        self.delta.dim()
    }

    pub fn n(&self) -> usize {
        self.delta_hat.dim()
    }

    pub fn block_of(&self, j: usize) -> Option<&FiberBlock> {
        self.blocks.iter().find(|b| b.j == j)
    }

    /// `π* g` for a function of `x`.
    pub fn lift_affine(&self, a: &AffineFunction) -> AffineFunction {
        a.extend(self.n())
    }

    pub fn lift_poly(&self, q: &Polynomial) -> Polynomial {
        q.embed(self.n(), &(0..self.ell()).collect::<Vec<_>>())
    }

    pub fn lift_pl(&self, f: &PLConvexFunction) -> PLConvexFunction {
        PLConvexFunction::from_pieces(f.pieces().iter().map(|a| self.lift_affine(a)).collect())
            .expect("nonempty")
    }

    /// The function on `Δ` whose pullback is `f̂`.
    pub fn descend_pl(&self, f_hat: &PLConvexFunction) -> Result<PLConvexFunction, FiberError> {
        let l = self.ell();
        let mut pieces = Vec::new();
        for a in f_hat.pieces() {
            if a.linear[l..].iter().any(|c| !c.is_zero()) {
                return Err(FiberError::PullbackNotConstantAlongFibers);
            }
            pieces.push(AffineFunction::new(a.linear[..l].to_vec(), a.constant.clone()));
        }
        Ok(PLConvexFunction::from_pieces(pieces)?)
    }

    /// The unimodular `y = M X̂` of `Δ̂` onto the standard `n`-simplex:
    /// `y_k = x_k − Σ_i x̂^k_i`, hatted coordinates unchanged.
    pub fn standard_map(&self) -> Vec<Vec<Rational>> {
        let n = self.n();
        let mut m: Vec<Vec<Rational>> = (0..n)
            .map(|r| (0..n).map(|c| if r == c { Rational::one() } else { Rational::zero() }).collect())
            .collect();
        for b in &self.blocks {
            if b.j == 0 {
                continue;
            }
            for i in 0..(b.rank as usize - 1) {
                m[b.j - 1][b.offset + i] = -Rational::one();
            }
        }
        m
    }

    /// Images of the hatted coordinates as polynomials in `(x, x_B)`.
    pub fn coordinate_map(&self) -> Vec<Polynomial> {
        let n = self.n();
        let mut images: Vec<Polynomial> = (0..self.ell()).map(|k| Polynomial::variable(n, k)).collect();
        for b in &self.blocks {
            let l = Polynomial::from_affine(&self.lift_affine(&self.delta.labels()[b.j]));
            for i in 0..(b.rank as usize - 1) {
                images.push(&l * &Polynomial::variable(n, b.offset + i));
            }
        }
        images
    }

    /// Value of the hatted coordinates at `(x, x_B)`.
    pub fn hat_point(&self, x: &[f64], x_b: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        let mut k = 0;
        for b in &self.blocks {
            let l = self.delta.labels()[b.j].eval_f64(x);
            for _ in 0..(b.rank - 1) {
                out.push(l * x_b[k]);
                k += 1;
            }
        }
        out
    }
}

pub fn build_fiber_model(ranks: &[u32]) -> Result<FiberModel, FiberError> {
    let weights = fiber_weights(ranks)?;
    let ell = ranks.len() - 1;
    let n = ranks.iter().map(|&d| d as usize).sum::<usize>() - 1;
    let delta = LabeledPolytope::standard_simplex(ell);
    let mut blocks = Vec::new();
    let mut offset = ell;
    for (j, &d) in ranks.iter().enumerate() {
        if d >= 2 {
            blocks.push(FiberBlock {
                j,
                rank: d,
                offset,
                simplex: LabeledPolytope::standard_simplex(d as usize - 1),
            });
            offset += d as usize - 1;
        }
    }
    let mut labels = Vec::new();
    let mut hat_labels = Vec::new();
    for (j, &d) in ranks.iter().enumerate() {
        let lj = delta.labels()[j].extend(n);
        if d == 1 {
            labels.push(lj);
            hat_labels.push((j, 0));
            continue;
        }
        let b = blocks.iter().find(|b| b.j == j).expect("block exists");
        let mut l0 = lj;
        for i in 0..(d as usize - 1) {
            l0.linear[b.offset + i] -= Rational::one();
        }
        labels.push(l0);
        hat_labels.push((j, 0));
        for i in 0..(d as usize - 1) {
            labels.push(AffineFunction::coordinate(n, b.offset + i));
            hat_labels.push((j, i + 1));
        }
    }
    let delta_hat = LabeledPolytope::new(labels).map_err(|e| FiberError::Pl(PlError::Polytope(e)))?;
    let vol_b = blocks
        .iter()
        .map(|b| Rational::new(BigInt::one(), factorial(b.rank as usize - 1)))
        .product();
    Ok(FiberModel {
        ranks: ranks.to_vec(),
        delta,
        delta_hat,
        hat_labels,
        blocks,
        vol_b,
        weights,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    pub check: String,
    #[serde(with = "serde_rational")]
    pub lhs: Rational,
    #[serde(with = "serde_rational")]
    pub rhs: Rational,
    #[serde(with = "serde_rational")]
    pub difference: Rational,
}

impl IdentityCheck {
    pub fn new(check: impl Into<String>, lhs: Rational, rhs: Rational) -> Self {
        let difference = &lhs - &rhs;
        Self {
            check: check.into(),
            lhs,
            rhs,
            difference,
        }
    }

    pub fn holds(&self) -> bool {
        self.difference.is_zero()
    }
}

/// Measure on the `Δ` factor of `Δ × Δ_B`.
#[derive(Clone, Copy, Debug)]
enum BaseMeasure {
    Volume,
    Facet(usize),
}

/// `∫_{Δ × Δ_B} f(x) G(x, x_B)` for the product of `dx` or `dσ_{F_j}` on `Δ`
/// with `dx_B`, or with `dσ_B` on the facet `(block, i)` of `Δ_B`.
fn product_integral(
    model: &FiberModel,
    f: &PLConvexFunction,
    g: &Polynomial,
    base: BaseMeasure,
    block_facet: Option<(usize, usize)>,
) -> Result<Rational, FiberError> {
    let l = model.ell();
    let mut by_fiber: BTreeMap<Vec<u32>, Polynomial> = BTreeMap::new();
    for (e, c) in g.terms() {
        let entry = by_fiber.entry(e[l..].to_vec()).or_insert_with(|| Polynomial::zero(l));
        *entry = &*entry + &Polynomial::monomial(l, e[..l].to_vec(), c.clone());
    }
    let mut total = Rational::zero();
    for (beta, a) in by_fiber {
        let mut fiber = Rational::one();
        for (bi, b) in model.blocks.iter().enumerate() {
            let m = b.rank as usize - 1;
            let exp = beta[b.offset - l..b.offset - l + m].to_vec();
            let mono = Polynomial::monomial(m, exp, Rational::one());
            fiber *= match block_facet {
                Some((fb, i)) if fb == bi => integrate_cell_face(
                    b.simplex.cell(),
                    i,
                    &b.simplex.labels()[i].linear,
                    &mono,
                ),
                _ => integrate_polynomial(&b.simplex, &mono)?,
            };
            if fiber.is_zero() {
                break;
            }
        }
        if fiber.is_zero() {
            continue;
        }
        let base_value = match base {
            BaseMeasure::Volume => integrate_pl_product(&model.delta, f, &a, Region::Interior)?,
            BaseMeasure::Facet(j) => integrate_pl_product_facet(&model.delta, f, &a, j)?,
        };
        total += fiber * base_value;
    }
    Ok(total)
}

/// `∫_{Δ̂} π*f · v dX̂ = Vol(Δ_B) ∫_Δ f p v dx`.
pub fn pullback_identity(model: &FiberModel, f: &PLConvexFunction, v: &Polynomial) -> Result<IdentityCheck, FiberError> {
    let lhs = integrate_pl_product(&model.delta_hat, &model.lift_pl(f), &model.lift_poly(v), Region::Interior)?;
    let rhs = &model.vol_b * integrate_pl_product(&model.delta, f, &(&model.weights.p * v), Region::Interior)?;
    Ok(IdentityCheck::new("pullback", lhs, rhs))
}

/// Per-facet `∫_{F̂} π*f · v · h dσ_Δ̂` on the hatted side against the product
/// form `(p/L_j) dx ∧ dσ_B` (blocks with `d_j ≥ 2`) or `p dσ_Δ ∧ dx_B`
/// (`d_j = 1`), for `h` a polynomial in hatted coordinates.
pub fn boundary_measure_identities(
    model: &FiberModel,
    f: &PLConvexFunction,
    v: &Polynomial,
    h: &Polynomial,
) -> Result<Vec<IdentityCheck>, FiberError> {
    let f_hat = model.lift_pl(f);
    let g_hat = &model.lift_poly(v) * h;
    let g_prod = g_hat.substitute(&model.coordinate_map());
    let p_prod = model.lift_poly(&model.weights.p);
    let mut out = Vec::new();
    for (c, &(j, i)) in model.hat_labels.iter().enumerate() {
        let lhs = integrate_pl_product_facet(&model.delta_hat, &f_hat, &g_hat, c)?;
        let rhs = match model.blocks.iter().position(|b| b.j == j) {
            Some(bi) => {
                let lj = model.lift_affine(&model.delta.labels()[j]);
                let q = p_prod.div_affine(&lj).expect("L_j divides p when d_j ≥ 2");
                product_integral(model, f, &(&g_prod * &q), BaseMeasure::Volume, Some((bi, i)))?
            }
            None => product_integral(model, f, &(&g_prod * &p_prod), BaseMeasure::Facet(j), None)?,
        };
        out.push(IdentityCheck::new(format!("boundary_measure[j={j},i={i}]"), lhs, rhs));
    }
    Ok(out)
}

/// `F^{Δ̂}_{v,w}(π*f) = Vol(Δ_B) F^Δ_{pv,ŵ}(f)` for a weight `w` on `Δ`
/// without poles.
pub fn futaki_identity(
    model: &FiberModel,
    f: &PLConvexFunction,
    v: &Polynomial,
    w: &WeightExpr,
) -> Result<IdentityCheck, FiberError> {
    let wv = w.paired_with(v)?;
    let f_hat = model.lift_pl(f);
    let two = Rational::from_integer(BigInt::from(2));
    let boundary = integrate_pl_product(&model.delta_hat, &f_hat, &model.lift_poly(v), Region::Boundary)?;
    let interior = integrate_pl_product(&model.delta_hat, &f_hat, &model.lift_poly(&wv), Region::Interior)?;
    let lhs = two * boundary - interior;
    let w_hat = model.weights.w_hat(w);
    let rhs = &model.vol_b * futaki(&model.delta, &(&model.weights.p * v), &w_hat, f)?;
    Ok(IdentityCheck::new("futaki_transfer", lhs, rhs))
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub ranks: Vec<u32>,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(IdentityCheck::holds)
    }
}

pub fn verify_identities(
    model: &FiberModel,
    f: &PLConvexFunction,
    v: &Polynomial,
    w: &WeightExpr,
) -> Result<IdentityReport, FiberError> {
    let mut checks = vec![pullback_identity(model, f, v)?];
    checks.extend(boundary_measure_identities(model, f, v, &Polynomial::one(model.n()))?);
    checks.push(futaki_identity(model, f, v, w)?);
    Ok(IdentityReport {
        ranks: model.ranks.clone(),
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransferConstants {
    /// `(2π)^{n+1} Vol(Δ_B)`.
    pub fiber_df_multiplier: TwoPiScaled,
    /// `Vol(C) (2π)^{n+1} Vol(Δ_B)`.
    pub bundle_df_multiplier: TwoPiScaled,
    #[serde(with = "serde_rational")]
    pub j_lower_factor: Rational,
}

#[derive(Clone, Debug)]
pub struct BundleProblem {
    pub spec: BundleSpec,
    pub model: FiberModel,
    pub weights: BundleWeights,
    pub l_ext: AffineFunction,
    pub transfer: TransferConstants,
}

impl BundleProblem {
    pub fn delta(&self) -> &LabeledPolytope {
        &self.model.delta
    }

    pub fn density(&self) -> &Polynomial {
        &self.weights.density
    }

    pub fn w_bar(&self) -> &WeightExpr {
        &self.weights.w_bar
    }

    /// `F^Δ_{pp̄,w̄}(f)`.
    pub fn futaki(&self, f: &PLConvexFunction) -> Result<Rational, FiberError> {
        Ok(futaki(self.delta(), self.density(), self.w_bar(), f)?)
    }

    /// Donaldson–Futaki invariant of the compatible bundle test configuration.
    pub fn bundle_df(&self, f: &PLConvexFunction) -> Result<TwoPiScaled, FiberError> {
        Ok(self.transfer.bundle_df_multiplier.scale(&self.futaki(f)?))
    }

    /// `‖f‖_{J_{pp̄}}` and the lower bound `inf p̄ · ‖f‖_{J_p}` it dominates.
    pub fn j_norms(&self, f: &PLConvexFunction) -> Result<(Rational, Rational), FiberError> {
        let exact = crate::functionals::j_norm(self.delta(), self.density(), f)?;
        let lower = crate::functionals::j_norm(self.delta(), &self.model.weights.p, f)?;
        Ok((exact, &self.transfer.j_lower_factor * lower))
    }
}

pub fn bundle_problem(spec: &BundleSpec) -> Result<BundleProblem, FiberError> {
    let mut weights = bundle_weights(spec)?;
    let l_ext = weights.solve()?;
    let model = build_fiber_model(&spec.ranks())?;
    let n = model.n() as i32;
    let fiber_df_multiplier = TwoPiScaled::new(model.vol_b.clone(), n + 1);
    let bundle_df_multiplier = spec.base_volume.mul(&fiber_df_multiplier);
    let j_lower_factor = weights.p_bar_min();
    Ok(BundleProblem {
        spec: spec.clone(),
        model,
        weights,
        l_ext,
        transfer: TransferConstants {
            fiber_df_multiplier,
            bundle_df_multiplier,
            j_lower_factor,
        },
    })
}

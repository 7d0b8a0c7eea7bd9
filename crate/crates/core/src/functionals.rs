//! Weighted Donaldson–Futaki functionals, norms modulo affine functions and
//! their non-Archimedean rescalings.

use crate::affine::AffineFunction;
use crate::integrate::{integrate_pl_product, linearity_cells, IntegrationError, Region};
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::pl::{crease_vertices, PLConvexFunction};
use crate::poly::Polynomial;
use crate::polytope::{LabeledPolytope, Point};
use crate::quadrature::{quad_simplices, QuadError, QuadOptions, QuadResult};
use crate::rational::{serde_rational, to_f64, Rational};
use crate::weights::{fubini_study_scalar, WeightError, WeightExpr};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("base point is not in the interior of the polytope")]
    BasePointOnBoundary,
    #[error("the J-norm program is unbounded; the weight is degenerate")]
    LpUnbounded,
    #[error("the J-norm program is infeasible")]
    LpInfeasible,
}

/// `rational · (2π)^two_pi_power`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoPiScaled {
    #[serde(with = "serde_rational")]
    pub rational: Rational,
    pub two_pi_power: i32,
}

impl TwoPiScaled {
    pub fn new(rational: Rational, two_pi_power: i32) -> Self {
        Self {
            rational,
            two_pi_power,
        }
    }

    pub fn two_pi() -> Self {
        Self::new(Rational::one(), 1)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.rational * &other.rational, self.two_pi_power + other.two_pi_power)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::new(&self.rational * s, self.two_pi_power)
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.rational) * (2.0 * std::f64::consts::PI).powi(self.two_pi_power)
    }

    pub fn value(&self) -> FunctionalValue {
        FunctionalValue {
            rational_part: self.rational.clone(),
            two_pi_power: self.two_pi_power,
            float_view: self.to_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    #[serde(rename = "rational", with = "serde_rational")]
    pub rational_part: Rational,
    pub two_pi_power: i32,
    pub float_view: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FutakiValue {
    Exact(Rational),
    Approximate(QuadResult),
}

impl FutakiValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            FutakiValue::Exact(r) => to_f64(r),
            FutakiValue::Approximate(q) => q.value,
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            FutakiValue::Exact(r) => Some(r),
            FutakiValue::Approximate(_) => None,
        }
    }
}

/// `2∫_{∂P} f v dσ`.
pub fn boundary_term(p: &LabeledPolytope, v: &Polynomial, f: &PLConvexFunction) -> Result<Rational, FunctionalError> {
    let b = integrate_pl_product(p, f, v, Region::Boundary)?;
    Ok(Rational::from_integer(BigInt::from(2)) * b)
}

/// `F_{v,w}(f) = 2∫_{∂P} f v dσ − ∫_P f w v dx`, exactly.
pub fn futaki(p: &LabeledPolytope, v: &Polynomial, w: &WeightExpr, f: &PLConvexFunction) -> Result<Rational, FunctionalError> {
    let wv = w.paired_with(v)?;
    let interior = integrate_pl_product(p, f, &wv, Region::Interior)?;
    Ok(boundary_term(p, v, f)? - interior)
}

/// `F_{v,w}(f)`, by quadrature on the interior term when `w` has an opaque
/// part.
pub fn evaluate_futaki(
    p: &LabeledPolytope,
    v: &Polynomial,
    w: &WeightExpr,
    f: &PLConvexFunction,
    rel_tol: f64,
) -> Result<FutakiValue, FunctionalError> {
    if w.is_exact() {
        return futaki(p, v, w, f).map(FutakiValue::Exact);
    }
    let boundary = to_f64(&boundary_term(p, v, f)?);
    let simplices: Vec<Vec<Vec<f64>>> = linearity_cells(p, f)
        .iter()
        .flat_map(|(_, c)| c.triangulate())
        .map(|s| s.iter().map(|x| x.iter().map(to_f64).collect()).collect())
        .collect();
    let options = QuadOptions::new(rel_tol);
    let r = quad_simplices(&simplices, |x| f.eval_f64(x) * w.eval_f64(x) * v.eval_f64(x), &options)?;
    Ok(FutakiValue::Approximate(QuadResult {
        value: boundary - r.value,
        ..r
    }))
}

/// `F⁺(f) = 2∫_{∂Δ} f pv dσ + Σ_{d_j≥2} ∫ 2d_j(d_j−1)/L_j · f pv dx` on the
/// standard simplex with block ranks `ranks`.
pub fn fplus(p: &LabeledPolytope, density: &Polynomial, ranks: &[u32], f: &PLConvexFunction) -> Result<Rational, FunctionalError> {
    let mut w = WeightExpr::constant(p.dim(), Rational::zero());
    for (j, &d) in ranks.iter().enumerate() {
        if d >= 2 {
            w = w.with_pole(fubini_study_scalar(d), p.labels()[j].clone());
        }
    }
    let interior = integrate_pl_product(p, f, &w.paired_with(density)?, Region::Interior)?;
    Ok(boundary_term(p, density, f)? + interior)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedPL {
    pub f_star: PLConvexFunction,
    pub base_point: Point,
    pub removed_affine: AffineFunction,
}

/// `f* = f − f_k` for the active piece `f_k` at `x₀` with the
/// lexicographically smallest gradient.
pub fn normalize_star(p: &LabeledPolytope, f: &PLConvexFunction, x0: &[Rational]) -> Result<NormalizedPL, FunctionalError> {
    if !p.is_interior(x0) {
        return Err(FunctionalError::BasePointOnBoundary);
    }
    let active = f.active_at(x0);
    let k = *active
        .iter()
        .min_by(|&&a, &&b| f.pieces()[a].linear.cmp(&f.pieces()[b].linear))
        .expect("some piece is active");
    let removed = f.pieces()[k].clone();
    Ok(NormalizedPL {
        f_star: f.add_affine(&removed.neg()),
        base_point: x0.to_vec(),
        removed_affine: removed,
    })
}

/// `∫ |f*| v dx`; `f* ≥ 0`, so no absolute value is needed.
pub fn l1_norm(p: &LabeledPolytope, v: &Polynomial, g: &NormalizedPL) -> Result<Rational, FunctionalError> {
    Ok(integrate_pl_product(p, &g.f_star, v, Region::Interior)?)
}

/// `inf_ξ ∫ (f + ξ − min_P (f + ξ)) v dx` as an exact LP in the slopes of
/// `ξ` and `t ≤ min (f + ξ)`, with `t` bounded by the values at the crease
/// vertices. The constant of `ξ` cancels and is fixed to 0.
pub fn j_norm(p: &LabeledPolytope, v: &Polynomial, f: &PLConvexFunction) -> Result<Rational, FunctionalError> {
    let n = p.dim();
    let mass = crate::integrate::integrate_polynomial(p, v)?;
    let moments: Vec<Rational> = (0..n)
        .map(|k| crate::integrate::integrate_polynomial(p, &(&Polynomial::variable(n, k) * v)))
        .collect::<Result<_, _>>()?;
    let fv = integrate_pl_product(p, f, v, Region::Interior)?;
    let mut lp = LinearProgram::new(n + 1, Sense::Minimize);
    for j in 0..=n {
        lp.set_free(j);
    }
    let mut obj = moments;
    obj.push(-&mass);
    lp.set_objective(obj);
    for z in crease_vertices(p, f) {
        let mut row: Vec<Rational> = z.iter().map(|c| -c).collect();
        row.push(Rational::one());
        lp.add_constraint(row, Relation::LessEq, f.eval(&z));
    }
    match lp.solve() {
        LpOutcome::Optimal(s) => Ok(fv + s.objective),
        LpOutcome::Unbounded => Err(FunctionalError::LpUnbounded),
        LpOutcome::Infeasible => Err(FunctionalError::LpInfeasible),
    }
}

/// `v`-barycenter `∫ x v / ∫ v`.
pub fn weighted_barycenter(p: &LabeledPolytope, v: &Polynomial) -> Result<Point, FunctionalError> {
    let n = p.dim();
    let mass = crate::integrate::integrate_polynomial(p, v)?;
    (0..n)
        .map(|k| {
            let m = crate::integrate::integrate_polynomial(p, &(&Polynomial::variable(n, k) * v))?;
            Ok(m / &mass)
        })
        .collect()
}

/// `∫ f v − (∫ v) · f(b_v)`: any affine minorant of `f` touching at the
/// `v`-barycenter `b_v` attains the infimum in the J-norm.
pub fn j_norm_closed_form(p: &LabeledPolytope, v: &Polynomial, f: &PLConvexFunction) -> Result<Rational, FunctionalError> {
    let b = weighted_barycenter(p, v)?;
    let mass = crate::integrate::integrate_polynomial(p, v)?;
    let fv = integrate_pl_product(p, f, v, Region::Interior)?;
    Ok(fv - mass * f.eval(&b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaKind {
    Toric,
    Compatible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaQuantity {
    DonaldsonFutaki,
    J,
}

/// Non-Archimedean values from polytope ones. `DF = (2π)^{n+1} [Vol(Δ_B)] F`
/// and `J^NA = (2π)^{n+1} [Vol(Δ_B)] / Vol · ‖f‖`, with the `Vol(Δ_B)`
/// factor present for compatible configurations.
pub fn na_convert(
    value: &Rational,
    quantity: NaQuantity,
    kind: NaKind,
    n: usize,
    volume: &Rational,
    base_volume: &Rational,
) -> FunctionalValue {
    let mut r = value.clone();
    if kind == NaKind::Compatible {
        r *= base_volume;
    }
    if quantity == NaQuantity::J {
        r /= volume;
    }
    TwoPiScaled::new(r, n as i32 + 1).value()
}

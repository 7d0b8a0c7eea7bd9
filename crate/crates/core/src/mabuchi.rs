//! Symplectic potentials `u = u₀ + φ` with `u₀ = ½ Σ L_i log L_i` the
//! Guillemin potential and `φ` polynomial, their weighted Mabuchi energies,
//! and numerical checks of the compatible lift `û = u + Σ L_j u_j`.
//!
//! With every `u_j` the Guillemin potential of `Δ_j`, the lift of `u₀` is the
//! Guillemin potential of `Δ̂` (the labels of `Δ̂` are `L_j L^j_i` and
//! `Σ_i L^j_i = 1`), so `û = û₀ + π*φ` is again of the form handled here.

use crate::affine::AffineFunction;
use crate::fibration::FiberModel;
use crate::integrate::{integrate_boundary, integrate_polynomial};
use crate::linalg::{combinations, determinant};
use crate::logint::{integrate_xlogx, integrate_xlogx_boundary, LogIntegralError, LogValue};
use crate::poly::Polynomial;
use crate::polytope::LabeledPolytope;
use crate::quadrature::{quad_adaptive, QuadError, QuadOptions, QuadResult};
use crate::rational::{to_f64, Rational};
use crate::weights::{WeightError, WeightExpr};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MabuchiError {
    #[error("the potential is not strictly convex at {0:?}")]
    NotConvex(Vec<f64>),
    #[error("entropy quadrature did not reach tolerance (estimated error {})", .0.error_estimate)]
    ToleranceNotReached(QuadResult),
    #[error("finite-difference Hessian is unstable at {0:?}")]
    FdInstability(Vec<f64>),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    LogIntegral(#[from] LogIntegralError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("the potential does not live on the base simplex of the model")]
    WrongPolytope,
}

impl From<QuadError> for MabuchiError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::ToleranceNotReached(r) => MabuchiError::ToleranceNotReached(r),
            QuadError::EvaluatorFailure(x) => MabuchiError::NotConvex(x),
            QuadError::InvalidTolerance => MabuchiError::ToleranceNotReached(QuadResult {
                value: f64::NAN,
                error_estimate: f64::INFINITY,
                magnitude: f64::NAN,
                evaluations: 0,
                converged: false,
            }),
        }
    }
}

fn half() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(2))
}

#[derive(Clone, Debug)]
pub struct SymplecticPotential {
    polytope: LabeledPolytope,
    phi: Polynomial,
    hess_phi: Vec<Vec<Polynomial>>,
    normals: Vec<Vec<f64>>,
    /// `(S, det(A_S)²)` over the `n`-subsets of facet normals with `det ≠ 0`.
    minors: Vec<(Vec<usize>, f64)>,
}

impl SymplecticPotential {
    pub fn new(polytope: &LabeledPolytope, phi: Polynomial) -> Result<Self, MabuchiError> {
        let n = polytope.dim();
        if phi.dim() != n {
            return Err(MabuchiError::DimensionMismatch {
                expected: n,
                found: phi.dim(),
            });
        }
        let hess_phi = (0..n)
            .map(|a| (0..n).map(|b| phi.derivative(a).derivative(b)).collect())
            .collect();
        let normals = polytope
            .labels()
            .iter()
            .map(|l| l.linear.iter().map(to_f64).collect())
            .collect();
        let labels = polytope.labels();
        let minors = combinations(labels.len(), n)
            .into_iter()
            .filter_map(|s| {
                let rows: Vec<Vec<Rational>> = s.iter().map(|&i| labels[i].linear.clone()).collect();
                let d = determinant(&rows);
                (!d.is_zero()).then(|| (s, to_f64(&(&d * &d))))
            })
            .collect();
        Ok(Self {
            polytope: polytope.clone(),
            phi,
            hess_phi,
            normals,
            minors,
        })
    }

    pub fn guillemin(polytope: &LabeledPolytope) -> Self {
        Self::new(polytope, Polynomial::zero(polytope.dim())).expect("dimensions agree")
    }

    pub fn polytope(&self) -> &LabeledPolytope {
        &self.polytope
    }

    pub fn phi(&self) -> &Polynomial {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    pub fn value_f64(&self, x: &[f64]) -> f64 {
        let u0: f64 = self
            .polytope
            .labels()
            .iter()
            .map(|l| {
                let t = l.eval_f64(x);
                if t == 0.0 { 0.0 } else { 0.5 * t * t.ln() }
            })
            .sum();
        u0 + self.phi.eval_f64(x)
    }

    /// `½ Σ p_i p_iᵀ / L_i`.
    pub fn reference_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (l, p) in self.polytope.labels().iter().zip(&self.normals) {
            let s = 0.5 / l.eval_f64(x);
            let p = DVector::from_column_slice(p);
            h += &p * p.transpose() * s;
        }
        h
    }

    pub fn phi_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |a, b| self.hess_phi[a][b].eval_f64(x))
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.reference_hessian(x) + self.phi_hessian(x)
    }

    /// `log det(Hess u · Hess u₀^{-1})` through `I + L^{-1} Hess φ L^{-T}`
    /// with `Hess u₀ = L Lᵀ`; `None` where `u` is not strictly convex.
    pub fn log_det_ratio(&self, x: &[f64]) -> Option<f64> {
        if self.phi.degree() < 2 {
            return Some(0.0);
        }
        let chol = self.reference_hessian(x).cholesky()?;
        let l = chol.l();
        let a = l.solve_lower_triangular(&self.phi_hessian(x))?;
        let a = l.solve_lower_triangular(&a.transpose())?;
        let m = DMatrix::identity(self.dim(), self.dim()) + a;
        let mc = m.cholesky()?;
        Some(2.0 * mc.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// `det Hess u₀ = 2^{-n} Σ_S det(A_S)² / ∏_{i∈S} L_i`, a sum of positive
    /// terms that stays accurate next to the boundary.
    pub fn reference_det(&self, x: &[f64]) -> f64 {
        let values: Vec<f64> = self.polytope.labels().iter().map(|l| l.eval_f64(x)).collect();
        let sum: f64 = self
            .minors
            .iter()
            .map(|(s, d2)| d2 / s.iter().map(|&i| values[i]).product::<f64>())
            .sum();
        sum * 0.5f64.powi(self.dim() as i32)
    }

    pub fn det_hessian(&self, x: &[f64]) -> f64 {
        match self.log_det_ratio(x) {
            Some(r) => self.reference_det(x) * r.exp(),
            None => self.hessian(x).determinant(),
        }
    }

    /// Exact `u(x)` at a rational interior point.
    pub fn value_at(&self, x: &[Rational]) -> LogValue {
        let mut v = LogValue::from_rational(self.phi.eval(x));
        for l in self.polytope.labels() {
            let t = l.eval(x);
            v += &LogValue::log_of(&t).scale(&(half() * t));
        }
        v
    }

    /// Exact `∇u(x) = ½ Σ p_i (log L_i(x) + 1) + ∇φ(x)`.
    pub fn gradient_at(&self, x: &[Rational]) -> Vec<LogValue> {
        (0..self.dim())
            .map(|k| {
                let mut g = LogValue::from_rational(self.phi.derivative(k).eval(x));
                for l in self.polytope.labels() {
                    let mut term = LogValue::log_of(&l.eval(x));
                    term.rational += Rational::one();
                    g += &term.scale(&(half() * &l.linear[k]));
                }
                g
            })
            .collect()
    }

    /// Checks strict convexity at `count` pseudo-random interior points.
    pub fn check_convex(&self, count: usize, seed: u64) -> Result<(), MabuchiError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let x = random_interior_point(&self.polytope, &mut rng);
            if self.hessian(&x).cholesky().is_none() {
                return Err(MabuchiError::NotConvex(x));
            }
        }
        Ok(())
    }

    /// `det Hess u · ∏ L_i` at `base + 10^{-k} · normal_k` for each `k`.
    pub fn boundary_profile(&self, facet: usize, base: &[f64], exponents: &[i32]) -> Vec<f64> {
        let normal = &self.normals[facet];
        let norm = normal.iter().map(|a| a * a).sum::<f64>().sqrt();
        exponents
            .iter()
            .map(|&k| {
                let t = 10f64.powi(-k) / norm;
                let x: Vec<f64> = base.iter().zip(normal).map(|(b, a)| b + t * a).collect();
                let prod: f64 = self.polytope.labels().iter().map(|l| l.eval_f64(&x)).product();
                self.det_hessian(&x) * prod
            })
            .collect()
    }
}

/// Convex combination of the vertices with exponential weights.
pub fn random_interior_point(p: &LabeledPolytope, rng: &mut impl Rng) -> Vec<f64> {
    let verts: Vec<Vec<f64>> = p.vertices().iter().map(|v| v.iter().map(to_f64).collect()).collect();
    let w: Vec<f64> = verts.iter().map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    (0..p.dim())
        .map(|j| verts.iter().zip(&w).map(|(v, wi)| v[j] * wi).sum::<f64>() / total)
        .collect()
}

/// `−∫ log det(Hess u · Hess u₀^{-1}) · density dx`.
pub fn entropy_term(u: &SymplecticPotential, density: &Polynomial, rel_tol: f64) -> Result<QuadResult, MabuchiError> {
    if u.phi().degree() < 2 {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            magnitude: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    let mut options = QuadOptions::new(rel_tol);
    options.abs_tol = 1e-14;
    let r = quad_adaptive(
        u.polytope(),
        |x| match u.log_det_ratio(x) {
            Some(v) => -v * density.eval_f64(x),
            None => f64::NAN,
        },
        &options,
    )?;
    Ok(r)
}

/// `F_{v,w}(u) = 2∫_∂ u v dσ − ∫ u w v dx`, exactly.
pub fn linear_term(u: &SymplecticPotential, density: &Polynomial, w: &WeightExpr) -> Result<LogValue, MabuchiError> {
    let p = u.polytope();
    let wv = w.paired_with(density)?;
    let two = Rational::from_integer(BigInt::from(2));
    let mut total = LogValue::zero();
    for l in p.labels() {
        let boundary: LogValue = integrate_xlogx_boundary(p, density, l)?.into_iter().sum();
        let interior = integrate_xlogx(p, &wv, l)?;
        total += &(&boundary.scale(&two) - &interior).scale(&half());
    }
    let phi = u.phi();
    let boundary = integrate_boundary(p, &(phi * density)).expect("dimensions agree").total;
    let interior = integrate_polynomial(p, &(phi * &wv)).expect("dimensions agree");
    total += &LogValue::from_rational(two * boundary - interior);
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct MabuchiValue {
    pub entropy_term: f64,
    pub entropy_error: f64,
    pub linear_term: LogValue,
    pub total: f64,
}

pub fn mabuchi_energy(
    u: &SymplecticPotential,
    density: &Polynomial,
    w: &WeightExpr,
    rel_tol: f64,
) -> Result<MabuchiValue, MabuchiError> {
    let linear = linear_term(u, density, w)?;
    let entropy = entropy_term(u, density, rel_tol)?;
    Ok(MabuchiValue {
        entropy_term: entropy.value,
        entropy_error: entropy.error_estimate,
        total: entropy.value + linear.to_f64(),
        linear_term: linear,
    })
}

/// `∫ u* v` for `u* = u − u(x₀) − ∇u(x₀)·(x − x₀) ≥ 0`, exactly.
pub fn normalized_l1(u: &SymplecticPotential, density: &Polynomial, x0: &[Rational]) -> Result<LogValue, MabuchiError> {
    let p = u.polytope();
    let n = p.dim();
    let mass = integrate_polynomial(p, density).expect("dimensions agree");
    let mut total = LogValue::from_rational(integrate_polynomial(p, &(u.phi() * density)).expect("dimensions agree"));
    for l in p.labels() {
        total += &integrate_xlogx(p, density, l)?.scale(&half());
    }
    total = &total - &u.value_at(x0).scale(&mass);
    let grad = u.gradient_at(x0);
    for k in 0..n {
        let shifted = AffineFunction::coordinate(n, k).sub(&AffineFunction::constant_fn(n, x0[k].clone()));
        let m = integrate_polynomial(p, &(&Polynomial::from_affine(&shifted) * density)).expect("dimensions agree");
        total = &total - &grad[k].scale(&m);
    }
    Ok(total)
}

/// `û = u + Σ L_j u_j` as a potential on `Δ̂`.
pub fn lift_potential(model: &FiberModel, u: &SymplecticPotential) -> Result<SymplecticPotential, MabuchiError> {
    if u.polytope().labels() != model.delta.labels() {
        return Err(MabuchiError::WrongPolytope);
    }
    SymplecticPotential::new(&model.delta_hat, model.lift_poly(u.phi()))
}

/// `w` on `Δ̂` through `π`; the weight must be pole free.
pub fn lift_weight(model: &FiberModel, w: &WeightExpr) -> Result<WeightExpr, MabuchiError> {
    let mut poly = w.paired_with(&Polynomial::one(model.ell()))?;
    poly = model.lift_poly(&poly);
    Ok(WeightExpr::polynomial(poly))
}

/// `û(X̂) = u(x) + Σ_j L_j(x) u_j(x̂^j / L_j(x))`, assembled block by block.
pub fn composed_lift_value(model: &FiberModel, u: &SymplecticPotential, x_hat: &[f64]) -> f64 {
    let l = model.ell();
    let x = &x_hat[..l];
    let mut v = u.value_f64(x);
    for b in &model.blocks {
        let lj = model.delta.labels()[b.j].eval_f64(x);
        let m = b.rank as usize - 1;
        let xb: Vec<f64> = x_hat[b.offset..b.offset + m].iter().map(|t| t / lj).collect();
        v += lj * SymplecticPotential::guillemin(&b.simplex).value_f64(&xb);
    }
    v
}

fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let at = |d: &[(usize, f64)]| -> f64 {
        let mut y = x.to_vec();
        for &(i, s) in d {
            y[i] += s;
        }
        f(&y)
    };
    let f0 = f(x);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in i + 1..n {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Euclidean distance to the boundary of `P`.
fn boundary_distance(p: &LabeledPolytope, x: &[f64]) -> f64 {
    p.labels()
        .iter()
        .map(|l| {
            let norm = l.linear.iter().map(|a| to_f64(a).powi(2)).sum::<f64>().sqrt();
            l.eval_f64(x) / norm
        })
        .fold(f64::INFINITY, f64::min)
}

/// Central-difference Hessian with two Richardson levels. Steps run
/// from `1e−3 · dist(x, ∂P)` up a doubling ladder; the extrapolate whose
/// determinant agrees best with the next rung is kept, which trades
/// truncation against cancellation near the boundary.
pub fn richardson_hessian(p: &LabeledPolytope, f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Result<DMatrix<f64>, MabuchiError> {
    let dist = boundary_distance(p, x);
    let ladder: Vec<DMatrix<f64>> = (0..8)
        .map(|k| {
            let h = 1e-3 * dist * 2f64.powi(k);
            let [a, b, c] = [h, h / 2.0, h / 4.0].map(|s| fd_hessian(f, x, s));
            let r1 = (&b * 4.0 - &a) / 3.0;
            let r2 = (&c * 4.0 - &b) / 3.0;
            (r2 * 16.0 - r1) / 15.0
        })
        .collect();
    let dets: Vec<f64> = ladder.iter().map(|m| m.determinant()).collect();
    let (best, spread) = (0..ladder.len() - 1)
        .map(|k| (k, ((dets[k] - dets[k + 1]) / dets[k + 1]).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("ladder has rungs");
    if !spread.is_finite() || spread > 1e-2 {
        return Err(MabuchiError::FdInstability(x.to_vec()));
    }
    Ok(ladder[best].clone())
}

#[derive(Clone, Debug, Serialize)]
pub struct DetIdentityPoint {
    pub point: Vec<f64>,
    /// Finite-difference `det Hess_{x̂} û`.
    pub finite_difference: f64,
    /// `det Hess u · det Hess u_B / p` at `π(x̂)`, with `u_B` in the
    /// fiber coordinates `x^j = x̂^j / L_j`.
    pub product_form: f64,
    pub p: f64,
    pub relative_error: f64,
}

/// Compares both sides of `det Hess û = det Hess u · det Hess u_B / p`.
///
/// The Schur complement of the fiber block of `L_j u_j(x̂^j / L_j)` vanishes,
/// and that block has determinant `det Hess u_j / L_j^{d_j − 1}`.
pub fn det_identity_at(model: &FiberModel, u: &SymplecticPotential, x_hat: &[f64]) -> Result<DetIdentityPoint, MabuchiError> {
    let f = |y: &[f64]| composed_lift_value(model, u, y);
    let h = richardson_hessian(&model.delta_hat, &f, x_hat)?;
    let fd = h.determinant();
    let l = model.ell();
    let x = &x_hat[..l];
    let p = model.weights.p.eval_f64(x);
    let mut rhs = u.det_hessian(x) / p;
    for b in &model.blocks {
        let lj = model.delta.labels()[b.j].eval_f64(x);
        let m = b.rank as usize - 1;
        let xb: Vec<f64> = x_hat[b.offset..b.offset + m].iter().map(|t| t / lj).collect();
        rhs *= SymplecticPotential::guillemin(&b.simplex).det_hessian(&xb);
    }
    Ok(DetIdentityPoint {
        point: x_hat.to_vec(),
        finite_difference: fd,
        product_form: rhs,
        p,
        relative_error: ((fd - rhs) / rhs).abs(),
    })
}

/// `C = F^{Δ̂}_{v,w}(Σ L_j u_j)` with `Σ L_j u_j = û₀ − π*u₀`.
pub fn lift_constant(model: &FiberModel, v: &Polynomial, w: &WeightExpr) -> Result<LogValue, MabuchiError> {
    let v_hat = model.lift_poly(v);
    let w_hat = lift_weight(model, w)?;
    let full = linear_term(&SymplecticPotential::guillemin(&model.delta_hat), &v_hat, &w_hat)?;
    let wv = w_hat.paired_with(&v_hat)?;
    let two = Rational::from_integer(BigInt::from(2));
    let mut base = LogValue::zero();
    for l in model.delta.labels() {
        let lh = model.lift_affine(l);
        let boundary: LogValue = integrate_xlogx_boundary(&model.delta_hat, &v_hat, &lh)?.into_iter().sum();
        let interior = integrate_xlogx(&model.delta_hat, &wv, &lh)?;
        base += &(&boundary.scale(&two) - &interior).scale(&half());
    }
    Ok(&full - &base)
}

#[derive(Clone, Debug, Serialize)]
pub struct MabuchiRow {
    pub hat: MabuchiValue,
    pub base: MabuchiValue,
    /// `ℳ^{Δ̂}(û) − Vol(Δ_B) ℳ^Δ(u)`.
    pub difference: f64,
    /// Exact difference of the linear terms.
    pub linear_difference: LogValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibleLiftReport {
    pub det_points: Vec<DetIdentityPoint>,
    pub max_det_relative_error: f64,
    pub rows: Vec<MabuchiRow>,
    pub constant: LogValue,
    /// `max_k |difference_k − C| / |C|`.
    pub max_constant_deviation: f64,
    pub linear_differences_exact: bool,
}

/// Checks the determinant identity at `sample_count` seeded interior points
/// for each potential and the Mabuchi relation across all potentials.
pub fn compatible_lift_check(
    model: &FiberModel,
    potentials: &[SymplecticPotential],
    v: &Polynomial,
    w: &WeightExpr,
    sample_count: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<CompatibleLiftReport, MabuchiError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det_points = Vec::new();
    for u in potentials {
        for _ in 0..sample_count {
            let x = random_interior_point(&model.delta_hat, &mut rng);
            det_points.push(det_identity_at(model, u, &x)?);
        }
    }
    let constant = lift_constant(model, v, w)?;
    let c = constant.to_f64();
    let v_hat = model.lift_poly(v);
    let w_hat = lift_weight(model, w)?;
    let pv = &model.weights.p * v;
    let w_base = model.weights.w_hat(w);
    let vol_b = to_f64(&model.vol_b);
    let mut rows = Vec::new();
    for u in potentials {
        let u_hat = lift_potential(model, u)?;
        let hat = mabuchi_energy(&u_hat, &v_hat, &w_hat, rel_tol)?;
        let base = mabuchi_energy(u, &pv, &w_base, rel_tol)?;
        let linear_difference = &hat.linear_term - &base.linear_term.scale(&model.vol_b);
        rows.push(MabuchiRow {
            difference: hat.total - vol_b * base.total,
            linear_difference,
            hat,
            base,
        });
    }
    let max_det_relative_error = det_points.iter().map(|d| d.relative_error).fold(0.0, f64::max);
    let max_constant_deviation = rows
        .iter()
        .map(|r| ((r.difference - c) / c.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max);
    let linear_differences_exact = rows.iter().all(|r| r.linear_difference == constant);
    Ok(CompatibleLiftReport {
        det_points,
        max_det_relative_error,
        rows,
        constant,
        max_constant_deviation,
        linear_differences_exact,
    })
}

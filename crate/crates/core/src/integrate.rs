//! Exact integration of polynomials, and of convex piecewise-linear functions
//! times polynomials, against `dx` on a polytope and `dσ` on its facets.
//!
//! On a `k`-simplex with vertices `w_0..w_k` the integrand is pulled back to the
//! standard simplex via `x = w_0 + Σ λ_i (w_i − w_0)` and integrated with
//! `∫ λ^α dλ = α! / (k + |α|)!`. The facet measure `dσ` is normalized by
//! `dL ∧ dσ = −dx`: a facet simplex has `dσ`-volume
//! `|det[w_1 − w_0, …, w_{ℓ−1} − w_0, q]| / (ℓ−1)!` for a lattice vector `q`
//! with `dL(q) = −1`.

use crate::affine::AffineFunction;
use crate::linalg::{determinant, unimodular_completion};
use crate::pl::PLConvexFunction;
use crate::poly::Polynomial;
use crate::polytope::{Cell, LabeledPolytope, Point, PolytopeError};
use crate::rational::{factorial, Rational};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrationError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
}

/// `∫ λ^α dλ` over the standard simplex of dimension `exp.len()`.
pub fn standard_simplex_moment(exp: &[u32]) -> Rational {
    let k = exp.len();
    let total: usize = exp.iter().map(|&a| a as usize).sum();
    let num: BigInt = exp.iter().map(|&a| factorial(a as usize)).product();
    Rational::new(num, factorial(k + total))
}

/// `q` composed with the affine parametrization of `simplex` by its first
/// vertex and edge vectors.
pub fn pullback_to_simplex(q: &Polynomial, simplex: &[Point]) -> Polynomial {
    let k = simplex.len() - 1;
    let w0 = &simplex[0];
    let images: Vec<AffineFunction> = (0..q.dim())
        .map(|j| {
            AffineFunction::new(
                (1..=k).map(|i| &simplex[i][j] - &w0[j]).collect(),
                w0[j].clone(),
            )
        })
        .collect();
    q.substitute_affine(&images)
}

/// `∫_S q dμ` where `μ` is a multiple of Lebesgue measure on the affine hull
/// of the simplex `S` with total mass `mass`.
pub fn integrate_on_simplex(q: &Polynomial, simplex: &[Point], mass: &Rational) -> Rational {
    if q.is_zero() || mass.is_zero() {
        return Rational::zero();
    }
    let k = simplex.len() - 1;
    if k == 0 {
        return q.eval(&simplex[0]) * mass;
    }
    let pulled = pullback_to_simplex(q, simplex);
    let raw: Rational = pulled
        .terms()
        .map(|(e, c)| c * standard_simplex_moment(e))
        .sum();
    raw * Rational::from_integer(factorial(k)) * mass
}

pub fn simplex_volume(simplex: &[Point]) -> Rational {
    crate::polytope::simplex_volume(simplex)
}

/// Coordinates adapted to a facet: `x = base + Σ s_i frame_i` parametrizes the
/// facet's affine hull and `dσ = sigma_jacobian · ds`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryChart {
    pub facet_label_index: usize,
    pub base_point: Point,
    pub frame: Vec<Vec<BigInt>>,
    /// Lattice vector with `dL(q) = −1`.
    pub transversal: Vec<BigInt>,
    pub sigma_jacobian: Rational,
}

impl BoundaryChart {
    pub fn new(p: &LabeledPolytope, facet: usize) -> Self {
        let label = &p.labels()[facet];
        let normal = label.integer_linear().expect("labels are integral");
        let mut cols = unimodular_completion(&normal).expect("label normals are primitive");
        let transversal: Vec<BigInt> = cols.remove(0).into_iter().map(|x| -x).collect();
        let base_point = p
            .cell()
            .face_vertices(facet)
            .first()
            .map(|&v| p.vertices()[v].clone())
            .expect("labels are active");
        let mut rows: Vec<Vec<Rational>> = cols
            .iter()
            .map(|c| c.iter().map(|x| Rational::from_integer(x.clone())).collect())
            .collect();
        rows.push(
            transversal
                .iter()
                .map(|x| Rational::from_integer(x.clone()))
                .collect(),
        );
        let sigma_jacobian = determinant(&rows).abs();
        Self {
            facet_label_index: facet,
            base_point,
            frame: cols,
            transversal,
            sigma_jacobian,
        }
    }

    pub fn point(&self, s: &[Rational]) -> Point {
        (0..self.base_point.len())
            .map(|j| {
                &self.base_point[j]
                    + self
                        .frame
                        .iter()
                        .zip(s)
                        .map(|(f, si)| Rational::from_integer(f[j].clone()) * si)
                        .sum::<Rational>()
            })
            .collect()
    }
}

/// `dσ`-volume of a facet simplex lying on the zero set of a label with
/// integer normal `normal`.
pub fn facet_simplex_mass(simplex: &[Point], normal: &[Rational]) -> Rational {
    let dim = normal.len();
    let norm2: Rational = normal.iter().map(|a| a * a).sum();
    // Any q with ⟨normal, q⟩ = ±1 gives the same |det|, lattice or not.
    let q: Vec<Rational> = normal.iter().map(|a| a / &norm2).collect();
    let mut rows: Vec<Vec<Rational>> = simplex[1..]
        .iter()
        .map(|w| w.iter().zip(&simplex[0]).map(|(a, b)| a - b).collect())
        .collect();
    rows.push(q);
    determinant(&rows).abs() / Rational::from_integer(factorial(dim - 1))
}

fn check_dim(p: &LabeledPolytope, q: &Polynomial) -> Result<(), IntegrationError> {
    if q.dim() != p.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

pub fn integrate_cell(cell: &Cell, q: &Polynomial) -> Rational {
    cell.triangulate()
        .iter()
        .map(|s| integrate_on_simplex(q, s, &simplex_volume(s)))
        .sum()
}

/// `∫ q dσ` over the face of `cell` on constraint `k`, with `dσ` normalized by
/// the integer vector `normal`.
pub fn integrate_cell_face(cell: &Cell, k: usize, normal: &[Rational], q: &Polynomial) -> Rational {
    cell.triangulate_face(k)
        .iter()
        .map(|s| integrate_on_simplex(q, s, &facet_simplex_mass(s, normal)))
        .sum()
}

pub fn integrate_polynomial(p: &LabeledPolytope, q: &Polynomial) -> Result<Rational, IntegrationError> {
    check_dim(p, q)?;
    Ok(integrate_cell(p.cell(), q))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryIntegral {
    pub total: Rational,
    pub per_facet: Vec<Rational>,
}

pub fn integrate_boundary(p: &LabeledPolytope, q: &Polynomial) -> Result<BoundaryIntegral, IntegrationError> {
    check_dim(p, q)?;
    let per_facet: Vec<Rational> = (0..p.labels().len())
        .map(|k| integrate_cell_face(p.cell(), k, &p.labels()[k].linear, q))
        .collect();
    Ok(BoundaryIntegral {
        total: per_facet.iter().sum(),
        per_facet,
    })
}

/// Cells of `P` on which `f` equals a single piece: `(piece index, cell)`.
/// Cell constraints start with the labels of `P`, in order.
pub fn linearity_cells(p: &LabeledPolytope, f: &PLConvexFunction) -> Vec<(usize, Cell)> {
    let pieces = f.pieces();
    if pieces.len() == 1 {
        return vec![(0, p.cell().clone())];
    }
    let mut out = Vec::new();
    for (k, fk) in pieces.iter().enumerate() {
        let mut cs = p.labels().to_vec();
        for (j, fj) in pieces.iter().enumerate() {
            if j != k {
                cs.push(fk.sub(fj));
            }
        }
        let cell = Cell::new(p.dim(), cs);
        if cell.is_full_dimensional() {
            out.push((k, cell));
        }
    }
    out
}

pub fn integrate_pl_product(
    p: &LabeledPolytope,
    f: &PLConvexFunction,
    q: &Polynomial,
    region: Region,
) -> Result<Rational, IntegrationError> {
    check_dim(p, q)?;
    if f.dim() != p.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: p.dim(),
            found: f.dim(),
        });
    }
    let mut total = Rational::zero();
    for (k, cell) in &linearity_cells(p, f) {
        let integrand = &Polynomial::from_affine(&f.pieces()[*k]) * q;
        match region {
            Region::Interior => total += integrate_cell(cell, &integrand),
            Region::Boundary => {
                for (i, label) in p.labels().iter().enumerate() {
                    total += integrate_cell_face(cell, i, &label.linear, &integrand);
                }
            }
        }
    }
    Ok(total)
}

/// `∫_{F_k} f q dσ` over the single facet on label `k`.
pub fn integrate_pl_product_facet(
    p: &LabeledPolytope,
    f: &PLConvexFunction,
    q: &Polynomial,
    k: usize,
) -> Result<Rational, IntegrationError> {
    check_dim(p, q)?;
    let normal = &p.labels()[k].linear;
    Ok(linearity_cells(p, f)
        .iter()
        .map(|(j, cell)| {
            let integrand = &Polynomial::from_affine(&f.pieces()[*j]) * q;
            integrate_cell_face(cell, k, normal, &integrand)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn x(dim: usize, k: usize) -> Polynomial {
        Polynomial::variable(dim, k)
    }

    #[test]
    fn simplex_moments() {
        assert_eq!(standard_simplex_moment(&[0, 0]), rat(1, 2));
        assert_eq!(standard_simplex_moment(&[1, 1]), rat(1, 24));
        assert_eq!(standard_simplex_moment(&[2]), rat(1, 3));
    }

    #[test]
    fn polynomial_examples() {
        let t = LabeledPolytope::standard_simplex(2);
        assert_eq!(integrate_polynomial(&t, &Polynomial::one(2)).unwrap(), rat(1, 2));
        assert_eq!(integrate_polynomial(&t, &(&x(2, 0) * &x(2, 1))).unwrap(), rat(1, 24));
        let i = LabeledPolytope::standard_simplex(1);
        let q = &x(1, 0) * &(&Polynomial::one(1) - &x(1, 0));
        assert_eq!(integrate_polynomial(&i, &q).unwrap(), rat(1, 6));
        assert!(matches!(
            integrate_polynomial(&t, &q),
            Err(IntegrationError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn boundary_examples() {
        let i = LabeledPolytope::standard_simplex(1);
        assert_eq!(integrate_boundary(&i, &Polynomial::one(1)).unwrap().total, int(2));
        let t = LabeledPolytope::standard_simplex(2);
        let b = integrate_boundary(&t, &Polynomial::one(2)).unwrap();
        assert_eq!(b.total, int(3));
        assert_eq!(b.per_facet, vec![int(1), int(1), int(1)]);
        // ∫ x_1 over the slanted edge, parametrized by x_1 ∈ [0,1] with dσ = dx_1.
        let b = integrate_boundary(&t, &x(2, 0)).unwrap();
        assert_eq!(b.per_facet[0], rat(1, 2));
    }

    #[test]
    fn charts_are_unimodular() {
        let t = LabeledPolytope::standard_simplex(3);
        for k in 0..4 {
            let c = BoundaryChart::new(&t, k);
            assert_eq!(c.sigma_jacobian, int(1));
            let normal = t.labels()[k].integer_linear().unwrap();
            let dot: BigInt = normal.iter().zip(&c.transversal).map(|(a, b)| a * b).sum();
            assert_eq!(dot, BigInt::from(-1));
            for f in &c.frame {
                let d: BigInt = normal.iter().zip(f).map(|(a, b)| a * b).sum();
                assert!(d.is_zero());
            }
            assert!(t.labels()[k].eval(&c.point(&[rat(1, 3), rat(-2, 5)])).is_zero());
        }
    }

    #[test]
    fn pl_products() {
        let i = LabeledPolytope::standard_simplex(1);
        let f = PLConvexFunction::new(
            &i,
            vec![
                AffineFunction::zero(1),
                AffineFunction::from_integers(&[2], int(-1)),
            ],
        )
        .unwrap();
        let one = Polynomial::one(1);
        assert_eq!(integrate_pl_product(&i, &f, &one, Region::Interior).unwrap(), rat(1, 4));
        assert_eq!(integrate_pl_product(&i, &f, &one, Region::Boundary).unwrap(), int(1));
        let t = LabeledPolytope::standard_simplex(2);
        let g = PLConvexFunction::new(&t, vec![AffineFunction::coordinate(2, 0)]).unwrap();
        assert_eq!(
            integrate_pl_product(&t, &g, &Polynomial::one(2), Region::Interior).unwrap(),
            rat(1, 6)
        );
    }
}

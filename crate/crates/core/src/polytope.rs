//! Labeled lattice polytopes: construction, Delzant audits and deterministic
//! crease-compatible triangulations.
//!
//! A polytope is `{x : L_i(x) ≥ 0}` for affine labels `L_i = ⟨p_i, x⟩ + c_i`.
//! Vertices come from solving every `ℓ`-subset of labels; triangulations pull
//! from the lexicographically smallest vertex of each face.

use crate::affine::AffineFunction;
use crate::linalg::{affine_dimension, combinations, determinant, maximal_minor_gcd, solve};
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::rational::{serde_rational_vec, Rational};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub type Point = Vec<Rational>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolytopeError {
    #[error("the polytope is unbounded")]
    UnboundedPolytope,
    #[error("the polytope is empty or lower dimensional")]
    EmptyOrLowerDimensional,
    #[error("label {0} does not cut out a facet")]
    InactiveLabel(usize),
    #[error("label {0} does not have a primitive integer normal")]
    NonPrimitiveNormal(usize),
    #[error("hyperplane {0} is identically zero")]
    DegenerateHyperplane(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// An H-polytope `{x : g_k(x) ≥ 0}` with its vertex set, without any lattice
/// requirements on the constraints. Vertices are sorted lexicographically.
#[derive(Clone, Debug)]
pub struct Cell {
    dim: usize,
    constraints: Vec<AffineFunction>,
    vertices: Vec<Point>,
    tight: Vec<Vec<usize>>,
}

impl Cell {
    pub fn new(dim: usize, constraints: Vec<AffineFunction>) -> Self {
        let mut found: BTreeSet<Point> = BTreeSet::new();
        if dim == 0 {
            if constraints.iter().all(|g| !g.constant.is_negative()) {
                found.insert(Vec::new());
            }
        } else {
            for subset in combinations(constraints.len(), dim) {
                let a: Vec<Vec<Rational>> =
                    subset.iter().map(|&i| constraints[i].linear.clone()).collect();
                let b: Vec<Rational> = subset.iter().map(|&i| -&constraints[i].constant).collect();
                let Some(x) = solve(&a, &b) else {
                    continue;
                };
                if found.contains(&x) {
                    continue;
                }
                if constraints.iter().all(|g| !g.eval(&x).is_negative()) {
                    found.insert(x);
                }
            }
        }
        let vertices: Vec<Point> = found.into_iter().collect();
        let tight = vertices
            .iter()
            .map(|v| {
                (0..constraints.len())
                    .filter(|&k| constraints[k].eval(v).is_zero())
                    .collect()
            })
            .collect();
        Self {
            dim,
            constraints,
            vertices,
            tight,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[AffineFunction] {
        &self.constraints
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Indices of constraints vanishing at each vertex.
    pub fn incidences(&self) -> &[Vec<usize>] {
        &self.tight
    }

    pub fn is_full_dimensional(&self) -> bool {
        affine_dimension(&self.vertices) == self.dim as isize
    }

    /// The cell intersected with `{h ≥ 0}`.
    pub fn cut(&self, h: &AffineFunction) -> Cell {
        let mut cs = self.constraints.clone();
        cs.push(h.clone());
        Cell::new(self.dim, cs)
    }

    /// Vertices on the zero set of constraint `k`.
    pub fn face_vertices(&self, k: usize) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.tight[v].contains(&k))
            .collect()
    }

    /// Whether constraint `k` cuts out a facet.
    pub fn is_facet(&self, k: usize) -> bool {
        let pts: Vec<Point> = self
            .face_vertices(k)
            .into_iter()
            .map(|v| self.vertices[v].clone())
            .collect();
        affine_dimension(&pts) == self.dim as isize - 1
    }

    fn points(&self, idx: &[usize]) -> Vec<Point> {
        idx.iter().map(|&i| self.vertices[i].clone()).collect()
    }

    /// Pulling triangulation of the face spanned by `face` (vertex indices,
    /// sorted) of dimension `face_dim`.
    fn pull(&self, face: &[usize], face_dim: usize, out: &mut Vec<Vec<usize>>) {
        if face_dim == 0 {
            out.push(vec![face[0]]);
            return;
        }
        let apex = face[0];
        let mut facets: BTreeSet<Vec<usize>> = BTreeSet::new();
        for k in 0..self.constraints.len() {
            let sub: Vec<usize> = face
                .iter()
                .copied()
                .filter(|&v| self.tight[v].contains(&k))
                .collect();
            if sub.len() == face.len() || sub.len() < face_dim || sub.contains(&apex) {
                continue;
            }
            if affine_dimension(&self.points(&sub)) == face_dim as isize - 1 {
                facets.insert(sub);
            }
        }
        for g in facets {
            let mut inner = Vec::new();
            self.pull(&g, face_dim - 1, &mut inner);
            for mut s in inner {
                s.insert(0, apex);
                out.push(s);
            }
        }
    }

    /// Full-dimensional simplices, empty if the cell is lower dimensional.
    pub fn triangulate(&self) -> Vec<Vec<Point>> {
        if !self.is_full_dimensional() {
            return Vec::new();
        }
        let all: Vec<usize> = (0..self.vertices.len()).collect();
        let mut out = Vec::new();
        self.pull(&all, self.dim, &mut out);
        out.into_iter().map(|s| self.points(&s)).collect()
    }

    /// `(dim−1)`-simplices tiling the facet on constraint `k`, empty when the
    /// constraint does not cut out a facet.
    pub fn triangulate_face(&self, k: usize) -> Vec<Vec<Point>> {
        if self.dim == 0 || !self.is_facet(k) {
            return Vec::new();
        }
        let face = self.face_vertices(k);
        let mut out = Vec::new();
        self.pull(&face, self.dim - 1, &mut out);
        out.into_iter().map(|s| self.points(&s)).collect()
    }
}

pub fn simplex_volume(simplex: &[Point]) -> Rational {
    let dim = simplex.len() - 1;
    let rows: Vec<Vec<Rational>> = simplex[1..]
        .iter()
        .map(|w| w.iter().zip(&simplex[0]).map(|(a, b)| a - b).collect())
        .collect();
    determinant(&rows).abs() / Rational::from_integer(crate::rational::factorial(dim))
}

#[derive(Clone, Debug)]
pub struct LabeledPolytope {
    dim: usize,
    labels: Vec<AffineFunction>,
    cell: Cell,
}

impl PartialEq for LabeledPolytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.labels == other.labels
    }
}

impl LabeledPolytope {
    pub fn new(labels: Vec<AffineFunction>) -> Result<Self, PolytopeError> {
        let Some(first) = labels.first() else {
            return Err(PolytopeError::EmptyOrLowerDimensional);
        };
        let dim = first.dim();
        for l in &labels {
            if l.dim() != dim {
                return Err(PolytopeError::DimensionMismatch {
                    expected: dim,
                    found: l.dim(),
                });
            }
        }
        if let Some(i) = labels.iter().position(|l| !l.has_primitive_normal()) {
            return Err(PolytopeError::NonPrimitiveNormal(i));
        }
        let cell = Cell::new(dim, labels.clone());
        if !cell.is_full_dimensional() {
            // A polyhedron with interior points but too few vertices is unbounded.
            return Err(if has_interior(dim, &labels) {
                PolytopeError::UnboundedPolytope
            } else {
                PolytopeError::EmptyOrLowerDimensional
            });
        }
        if !is_bounded(dim, &labels) {
            return Err(PolytopeError::UnboundedPolytope);
        }
        if let Some(i) = (0..labels.len()).find(|&i| !cell.is_facet(i)) {
            return Err(PolytopeError::InactiveLabel(i));
        }
        Ok(Self { dim, labels, cell })
    }

    /// The standard simplex with labels `1 − Σx_k, x_1, …, x_ℓ`, in that order.
    pub fn standard_simplex(dim: usize) -> Self {
        let mut labels = vec![AffineFunction::from_integers(&vec![-1; dim], Rational::one())];
        labels.extend((0..dim).map(|k| AffineFunction::coordinate(dim, k)));
        Self::new(labels).expect("standard simplex is valid")
    }

    /// `[0,1]^dim` with labels `x_k` then `1 − x_k`.
    pub fn unit_cube(dim: usize) -> Self {
        let mut labels: Vec<AffineFunction> =
            (0..dim).map(|k| AffineFunction::coordinate(dim, k)).collect();
        for k in 0..dim {
            let mut l = AffineFunction::coordinate(dim, k).neg();
            l.constant = Rational::one();
            labels.push(l);
        }
        Self::new(labels).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[AffineFunction] {
        &self.labels
    }

    pub fn vertices(&self) -> &[Point] {
        self.cell.vertices()
    }

    pub fn cell(&self) -> &Cell {
        &self.cell
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.labels.iter().all(|l| !l.eval(x).is_negative())
    }

    pub fn is_interior(&self, x: &[Rational]) -> bool {
        self.labels.iter().all(|l| l.eval(x).is_positive())
    }

    pub fn barycenter_of_vertices(&self) -> Point {
        let n = Rational::from_integer(BigInt::from(self.vertices().len()));
        (0..self.dim)
            .map(|k| self.vertices().iter().map(|v| v[k].clone()).sum::<Rational>() / &n)
            .collect()
    }

    pub fn triangulate(&self) -> Vec<Vec<Point>> {
        self.cell.triangulate()
    }

    pub fn volume(&self) -> Rational {
        self.triangulate().iter().map(|s| simplex_volume(s)).sum()
    }

    /// Apply `x ↦ M x + b` to the polytope; `M` must be unimodular for the
    /// image to remain labeled.
    pub fn transform(&self, m: &[Vec<Rational>], b: &[Rational]) -> Result<Self, PolytopeError> {
        let inv = crate::linalg::inverse(m).ok_or(PolytopeError::EmptyOrLowerDimensional)?;
        let offset: Vec<Rational> = crate::linalg::mat_vec(&inv, b).into_iter().map(|x| -x).collect();
        let labels = self.labels.iter().map(|l| l.pullback(&inv, &offset)).collect();
        Self::new(labels)
    }

    pub fn delzant(&self) -> DelzantVerdict {
        is_delzant(self)
    }
}

/// Whether some point has every label strictly positive.
fn has_interior(dim: usize, labels: &[AffineFunction]) -> bool {
    let mut lp = LinearProgram::new(dim + 1, Sense::Maximize);
    for j in 0..=dim {
        lp.set_free(j);
    }
    let mut obj = vec![Rational::zero(); dim + 1];
    obj[dim] = Rational::one();
    lp.set_objective(obj.clone());
    lp.add_constraint(obj, Relation::LessEq, Rational::one());
    for l in labels {
        let mut row = l.linear.clone();
        row.push(-Rational::one());
        lp.add_constraint(row, Relation::GreaterEq, -&l.constant);
    }
    matches!(lp.solve(), LpOutcome::Optimal(s) if s.objective.is_positive())
}

fn is_bounded(dim: usize, labels: &[AffineFunction]) -> bool {
    for k in 0..dim {
        for sense in [Sense::Maximize, Sense::Minimize] {
            let mut lp = LinearProgram::new(dim, sense);
            for j in 0..dim {
                lp.set_free(j);
            }
            let mut obj = vec![Rational::zero(); dim];
            obj[k] = Rational::one();
            lp.set_objective(obj);
            for l in labels {
                lp.add_constraint(l.linear.clone(), Relation::GreaterEq, -&l.constant);
            }
            if lp.solve() == LpOutcome::Unbounded {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VertexDefect {
    /// The vertex lies on a number of label zero sets different from `ℓ`.
    NotSimple { incident: usize },
    /// The incident normals span a sublattice of this index.
    NotIntegral { index: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexFailure {
    #[serde(with = "serde_rational_vec")]
    pub vertex: Point,
    pub labels: Vec<usize>,
    pub defects: Vec<VertexDefect>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelzantVerdict {
    pub simple: bool,
    pub integral: bool,
    pub failing_vertices: Vec<VertexFailure>,
}

impl DelzantVerdict {
    pub fn is_delzant(&self) -> bool {
        self.simple && self.integral
    }
}

/// Simplicity and lattice smoothness at each vertex. At a simple vertex the
/// lattice index is `|det|` of the incident normals; in general it is the gcd
/// of their maximal minors.
pub fn is_delzant(p: &LabeledPolytope) -> DelzantVerdict {
    let cell = p.cell();
    let mut failing = Vec::new();
    let (mut simple, mut integral) = (true, true);
    for (v, inc) in cell.vertices().iter().zip(cell.incidences()) {
        let mut defects = Vec::new();
        if inc.len() != p.dim() {
            simple = false;
            defects.push(VertexDefect::NotSimple { incident: inc.len() });
        }
        let normals: Vec<Vec<BigInt>> = inc
            .iter()
            .map(|&i| p.labels()[i].integer_linear().expect("labels are integral"))
            .collect();
        let index = if inc.len() == p.dim() {
            crate::linalg::integer_determinant(&normals).abs()
        } else {
            maximal_minor_gcd(&normals, p.dim())
        };
        if !index.abs().is_one() {
            integral = false;
            defects.push(VertexDefect::NotIntegral {
                index: index.to_string(),
            });
        }
        if !defects.is_empty() {
            failing.push(VertexFailure {
                vertex: v.clone(),
                labels: inc.clone(),
                defects,
            });
        }
    }
    DelzantVerdict {
        simple,
        integral,
        failing_vertices: failing,
    }
}

#[derive(Clone, Debug)]
pub struct SimplicialSubdivision {
    pub simplices: Vec<Vec<Point>>,
    pub compatible_hyperplanes: Vec<AffineFunction>,
}

impl SimplicialSubdivision {
    pub fn volume(&self) -> Rational {
        self.simplices.iter().map(|s| simplex_volume(s)).sum()
    }
}

/// Splits `cell` by every hyperplane that changes sign on it. Hyperplanes with
/// zero linear part are globally signed and ignored.
pub fn split_cell(
    cell: &Cell,
    hyperplanes: &[AffineFunction],
) -> Result<Vec<Cell>, PolytopeError> {
    for (i, h) in hyperplanes.iter().enumerate() {
        if h.dim() != cell.dim() {
            return Err(PolytopeError::DimensionMismatch {
                expected: cell.dim(),
                found: h.dim(),
            });
        }
        if h.is_zero() {
            return Err(PolytopeError::DegenerateHyperplane(i));
        }
    }
    let mut regions = vec![cell.clone()];
    for h in hyperplanes.iter().filter(|h| !h.is_linear_zero()) {
        let mut next = Vec::with_capacity(regions.len());
        for r in regions {
            let values: Vec<Rational> = r.vertices().iter().map(|v| h.eval(v)).collect();
            let pos = values.iter().any(|x| x.is_positive());
            let neg = values.iter().any(|x| x.is_negative());
            if pos && neg {
                for side in [h.clone(), h.neg()] {
                    let piece = r.cut(&side);
                    if piece.is_full_dimensional() {
                        next.push(piece);
                    }
                }
            } else {
                next.push(r);
            }
        }
        regions = next;
    }
    Ok(regions)
}

pub fn triangulate_with_creases(
    p: &LabeledPolytope,
    hyperplanes: &[AffineFunction],
) -> Result<SimplicialSubdivision, PolytopeError> {
    let regions = split_cell(p.cell(), hyperplanes)?;
    Ok(SimplicialSubdivision {
        simplices: regions.iter().flat_map(Cell::triangulate).collect(),
        compatible_hyperplanes: hyperplanes.to_vec(),
    })
}

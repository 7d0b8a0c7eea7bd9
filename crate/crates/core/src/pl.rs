//! Convex piecewise-linear functions `f = max_k f_k` and the test configuration
//! polytopes `Δ_{R−f}` they define one dimension up.

use crate::affine::AffineFunction;
use crate::integrate::linearity_cells;
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::polytope::{is_delzant, DelzantVerdict, LabeledPolytope, Point, PolytopeError};
use crate::rational::{ceil, Rational};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlError {
    #[error("a piecewise-linear function needs at least one piece")]
    EmptyPieceList,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("R − f is not strictly positive on the polytope (minimum {min})")]
    NotStrictlyPositive { min: Rational },
    #[error("piece {0} does not have an integer linear part")]
    NonIntegerSlope(usize),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// `f = max_k pieces[k]`. Pieces are sorted and distinct; functions built with
/// [`make_pl`] also have every piece active on the polytope.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PLConvexFunction {
    pieces: Vec<AffineFunction>,
}

impl PLConvexFunction {
    /// Same as [`make_pl`].
    pub fn new(p: &LabeledPolytope, pieces: Vec<AffineFunction>) -> Result<Self, PlError> {
        make_pl(p, pieces)
    }

    /// Sorts and deduplicates without pruning.
    pub fn from_pieces(pieces: Vec<AffineFunction>) -> Result<Self, PlError> {
        let Some(first) = pieces.first() else {
            return Err(PlError::EmptyPieceList);
        };
        let dim = first.dim();
        if let Some(bad) = pieces.iter().find(|g| g.dim() != dim) {
            return Err(PlError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        let set: BTreeSet<AffineFunction> = pieces.into_iter().collect();
        Ok(Self {
            pieces: set.into_iter().collect(),
        })
    }

    pub fn affine(a: AffineFunction) -> Self {
        Self { pieces: vec![a] }
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim()
    }

    pub fn pieces(&self) -> &[AffineFunction] {
        &self.pieces
    }

    pub fn is_affine(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.pieces
            .iter()
            .map(|g| g.eval(x))
            .max()
            .expect("nonempty")
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|g| g.eval_f64(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of pieces attaining the maximum at `x`.
    pub fn active_at(&self, x: &[Rational]) -> Vec<usize> {
        let m = self.eval(x);
        (0..self.pieces.len())
            .filter(|&k| self.pieces[k].eval(x) == m)
            .collect()
    }

    /// Pairwise differences `f_j − f_k`, `j < k`.
    pub fn crease_hyperplanes(&self) -> Vec<AffineFunction> {
        let mut out = Vec::new();
        for j in 0..self.pieces.len() {
            for k in j + 1..self.pieces.len() {
                out.push(self.pieces[j].sub(&self.pieces[k]));
            }
        }
        out
    }

    pub fn add_affine(&self, xi: &AffineFunction) -> Self {
        Self::from_pieces(self.pieces.iter().map(|g| g.add(xi)).collect()).expect("nonempty")
    }

    pub fn scale(&self, s: &Rational) -> Self {
        assert!(s.is_positive(), "only positive scalings preserve convexity");
        Self::from_pieces(self.pieces.iter().map(|g| g.scale(s)).collect()).expect("nonempty")
    }

    pub fn has_constant_piece(&self) -> bool {
        self.pieces.iter().any(AffineFunction::is_linear_zero)
    }
}

/// `max_{x ∈ P} (f_k − max_{j≠k} f_j)`, or `None` when `k` is the only piece.
fn activity_margin(p: &LabeledPolytope, pieces: &[AffineFunction], k: usize) -> Option<Rational> {
    if pieces.len() == 1 {
        return None;
    }
    let n = p.dim();
    // Variables (x, t): maximize t with t ≤ f_k − f_j and x ∈ P.
    let mut lp = LinearProgram::new(n + 1, Sense::Maximize);
    for v in 0..=n {
        lp.set_free(v);
    }
    let mut obj = vec![Rational::zero(); n + 1];
    obj[n] = Rational::one();
    lp.set_objective(obj);
    for label in p.labels() {
        let mut row = label.linear.clone();
        row.push(Rational::zero());
        lp.add_constraint(row, Relation::GreaterEq, -&label.constant);
    }
    for (j, g) in pieces.iter().enumerate() {
        if j == k {
            continue;
        }
        let d = pieces[k].sub(g);
        let mut row: Vec<Rational> = d.linear.iter().map(|a| -a).collect();
        row.push(Rational::one());
        lp.add_constraint(row, Relation::LessEq, d.constant.clone());
    }
    match lp.solve() {
        LpOutcome::Optimal(s) => Some(s.objective),
        _ => unreachable!("bounded feasible program over a polytope"),
    }
}

/// Deduplicates, sorts and removes every piece that is nowhere the strict
/// maximum on a full-dimensional set.
pub fn make_pl(p: &LabeledPolytope, pieces: Vec<AffineFunction>) -> Result<PLConvexFunction, PlError> {
    let f = PLConvexFunction::from_pieces(pieces)?;
    if f.dim() != p.dim() {
        return Err(PlError::DimensionMismatch {
            expected: p.dim(),
            found: f.dim(),
        });
    }
    let kept: Vec<AffineFunction> = (0..f.pieces.len())
        .filter(|&k| activity_margin(p, &f.pieces, k).is_none_or(|m| m.is_positive()))
        .map(|k| f.pieces[k].clone())
        .collect();
    Ok(PLConvexFunction { pieces: kept })
}

/// Sorted, distinct vertices of the linearity cells of `f` on `P`.
pub fn crease_vertices(p: &LabeledPolytope, f: &PLConvexFunction) -> Vec<Point> {
    let set: BTreeSet<Point> = linearity_cells(p, f)
        .into_iter()
        .flat_map(|(_, c)| c.vertices().to_vec())
        .collect();
    set.into_iter().collect()
}

/// The finest class of a test configuration: rational, Delzant, or Delzant
/// with a constant piece.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "RPL")]
    Rpl,
    #[serde(rename = "DPL")]
    Dpl,
    #[serde(rename = "DPL_dom")]
    DplDom,
}

impl Classification {
    pub fn is_dpl(self) -> bool {
        self >= Classification::Dpl
    }

    pub fn is_dpl_dom(self) -> bool {
        self == Classification::DplDom
    }
}

#[derive(Clone, Debug)]
pub struct TestConfigPolytope {
    pub base: LabeledPolytope,
    pub f: PLConvexFunction,
    pub r: Rational,
    pub polytope: LabeledPolytope,
    pub verdict: DelzantVerdict,
    pub classification: Classification,
}

fn check_integer_slopes(pieces: &[AffineFunction]) -> Result<(), PlError> {
    match pieces.iter().position(|g| g.integer_linear().is_none()) {
        Some(k) => Err(PlError::NonIntegerSlope(k)),
        None => Ok(()),
    }
}

/// `max_P f`, attained at a vertex of `P`.
pub fn max_on_polytope(p: &LabeledPolytope, f: &PLConvexFunction) -> Rational {
    p.vertices().iter().map(|v| f.eval(v)).max().expect("nonempty")
}

pub fn default_height(p: &LabeledPolytope, f: &PLConvexFunction) -> Rational {
    Rational::from_integer(ceil(&max_on_polytope(p, f))) + Rational::one()
}

/// `{(x, y) : x ∈ Δ, 0 ≤ y ≤ R − f(x)}` with labels `L_i`, `y`, `R − y − f_k`.
pub fn donaldson_polytope(
    base: &LabeledPolytope,
    f: &PLConvexFunction,
    r: Option<Rational>,
) -> Result<TestConfigPolytope, PlError> {
    if f.dim() != base.dim() {
        return Err(PlError::DimensionMismatch {
            expected: base.dim(),
            found: f.dim(),
        });
    }
    check_integer_slopes(f.pieces())?;
    let r = r.unwrap_or_else(|| default_height(base, f));
    let min = &r - max_on_polytope(base, f);
    if !min.is_positive() {
        return Err(PlError::NotStrictlyPositive { min });
    }
    let n = base.dim();
    let mut labels: Vec<AffineFunction> = base.labels().iter().map(|l| l.extend(n + 1)).collect();
    labels.push(AffineFunction::coordinate(n + 1, n));
    for g in f.pieces() {
        let mut linear: Vec<Rational> = g.linear.iter().map(|a| -a).collect();
        linear.push(-Rational::one());
        labels.push(AffineFunction::new(linear, &r - &g.constant));
    }
    let polytope = LabeledPolytope::new(labels)?;
    let verdict = is_delzant(&polytope);
    let mut tc = TestConfigPolytope {
        base: base.clone(),
        f: f.clone(),
        r,
        polytope,
        verdict,
        classification: Classification::Rpl,
    };
    tc.classification = check_dpl_dom(&tc);
    Ok(tc)
}

pub fn check_dpl_dom(tc: &TestConfigPolytope) -> Classification {
    if !is_delzant(&tc.polytope).is_delzant() {
        Classification::Rpl
    } else if tc.f.has_constant_piece() {
        Classification::DplDom
    } else {
        Classification::Dpl
    }
}

/// `f + ξ` for `ξ` with integer linear part.
pub fn twist(f: &PLConvexFunction, xi: &AffineFunction) -> Result<PLConvexFunction, PlError> {
    if xi.dim() != f.dim() {
        return Err(PlError::DimensionMismatch {
            expected: f.dim(),
            found: xi.dim(),
        });
    }
    check_integer_slopes(std::slice::from_ref(xi))?;
    Ok(f.add_affine(xi))
}

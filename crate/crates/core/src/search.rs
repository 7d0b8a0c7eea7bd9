//! Grid search for the uniform stability constant.
//!
//! Convex functions are replaced by nodal values on the principal lattice of
//! spacing `1/N` of a standard simplex, interpolated linearly on a Kuhn
//! triangulation. Minimizing `F_{v,w}` over this cone is an exact LP, so the
//! result is an upper bound for the true constant: a nonpositive value
//! certifies a destabilizer while a positive one is only evidence.

use crate::affine::AffineFunction;
use crate::fibration::{bundle_problem, BundleProblem, FiberError};
use crate::functionals::{futaki, j_norm, weighted_barycenter, FunctionalError};
use crate::integrate::{facet_simplex_mass, integrate_on_simplex, integrate_pl_product, simplex_volume, Region};
use crate::linalg::inverse;
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::pl::{PLConvexFunction, PlError};
use crate::poly::Polynomial;
use crate::polytope::{LabeledPolytope, Point};
use crate::rational::{format_rational, serde_rational, to_f64, Rational};
use crate::weights::{BundleSpec, WeightError, WeightExpr};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("grid search needs the standard simplex")]
    NotStandardSimplex,
    #[error("resolution {0} is below 2")]
    ResolutionTooSmall(usize),
    #[error("the grid node nearest the barycenter lies on the boundary at resolution {0}")]
    BaseNodeOnBoundary(usize),
    #[error("the normalized LP is infeasible")]
    LpInfeasible,
    #[error("the normalized LP is unbounded")]
    LpUnbounded,
    #[error("nodal values violate grid convexity")]
    NotConvex,
    #[error("the extracted envelope is affine")]
    EnvelopeDegenerate,
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Fiber(#[from] FiberError),
    #[error(transparent)]
    Pl(#[from] PlError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "L1_star")]
    L1Star,
    J,
}

impl FromStr for Norm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l1" | "L1" | "L1_star" => Ok(Norm::L1Star),
            "j" | "J" => Ok(Norm::J),
            other => Err(format!("unknown norm {other:?} (expected l1 or j)")),
        }
    }
}

/// Two triangulation simplices sharing a facet.
#[derive(Clone, Debug)]
pub struct Adjacency {
    pub simplex: usize,
    pub neighbor: usize,
    /// Node of `neighbor` opposite the shared facet.
    pub opposite: usize,
}

#[derive(Clone, Debug)]
pub struct BoundaryFace {
    pub simplex: usize,
    pub nodes: Vec<usize>,
    pub label: usize,
}

#[derive(Clone, Debug)]
pub struct ConvexGrid {
    pub polytope: LabeledPolytope,
    pub resolution: usize,
    pub nodes: Vec<Point>,
    /// Integer coordinates `N · x` of each node.
    pub lattice: Vec<Vec<usize>>,
    pub simplices: Vec<Vec<usize>>,
    pub adjacency: Vec<Adjacency>,
    pub boundary_faces: Vec<BoundaryFace>,
    barycentric: Vec<Vec<AffineFunction>>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn lattice_points(dim: usize, total: usize) -> Vec<Vec<usize>> {
    if dim == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in lattice_points(dim - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl ConvexGrid {
    /// Kuhn triangulation of `{N ≥ y_1 ≥ … ≥ y_ℓ ≥ 0}` pulled back through
    /// `y_k = Σ_{i ≥ k} N x_i`.
    pub fn new(p: &LabeledPolytope, resolution: usize) -> Result<Self, SearchError> {
        let l = p.dim();
        if p.labels() != LabeledPolytope::standard_simplex(l).labels() {
            return Err(SearchError::NotStandardSimplex);
        }
        if resolution < 2 {
            return Err(SearchError::ResolutionTooSmall(resolution));
        }
        let n = resolution;
        let lattice = lattice_points(l, n);
        let index: BTreeMap<Vec<usize>, usize> = lattice.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let denom = Rational::from_integer(BigInt::from(n));
        let nodes: Vec<Point> = lattice
            .iter()
            .map(|a| a.iter().map(|&k| Rational::from_integer(BigInt::from(k)) / &denom).collect())
            .collect();
        let to_x = |y: &[usize]| -> Vec<usize> { (0..l).map(|k| y[k] - if k + 1 < l { y[k + 1] } else { 0 }).collect() };
        let mut simplices = Vec::new();
        for cube in lattice_points_box(l, n) {
            for perm in permutations(l) {
                let mut y = cube.clone();
                let mut verts = vec![y.clone()];
                for &k in &perm {
                    y[k] += 1;
                    verts.push(y.clone());
                }
                let inside = verts.iter().all(|v| v[0] <= n && v.windows(2).all(|w| w[0] >= w[1]));
                if inside {
                    let mut s: Vec<usize> = verts.iter().map(|v| index[&to_x(v)]).collect();
                    s.sort_unstable();
                    simplices.push(s);
                }
            }
        }
        simplices.sort();
        let mut facets: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for (si, s) in simplices.iter().enumerate() {
            for drop in 0..s.len() {
                let mut f = s.clone();
                let opposite = f.remove(drop);
                facets.entry(f).or_default().push((si, opposite));
            }
        }
        let mut adjacency = Vec::new();
        let mut boundary_faces = Vec::new();
        for (face, owners) in &facets {
            match owners.as_slice() {
                [(a, _), (b, ob)] => adjacency.push(Adjacency {
                    simplex: *a,
                    neighbor: *b,
                    opposite: *ob,
                }),
                [(a, _)] => {
                    let label = (0..=l)
                        .find(|&k| {
                            face.iter().all(|&i| {
                                let a = &lattice[i];
                                if k == 0 { a.iter().sum::<usize>() == n } else { a[k - 1] == 0 }
                            })
                        })
                        .expect("an unshared face lies in a facet");
                    boundary_faces.push(BoundaryFace {
                        simplex: *a,
                        nodes: face.clone(),
                        label,
                    });
                }
                _ => unreachable!("a facet is shared by at most two simplices"),
            }
        }
        let barycentric = simplices
            .iter()
            .map(|s| {
                let m: Vec<Vec<Rational>> = s
                    .iter()
                    .map(|&i| {
                        let mut row = nodes[i].clone();
                        row.push(Rational::one());
                        row
                    })
                    .collect();
                let inv = inverse(&m).expect("grid simplices are nondegenerate");
                (0..s.len())
                    .map(|c| AffineFunction::new((0..l).map(|r| inv[r][c].clone()).collect(), inv[l][c].clone()))
                    .collect()
            })
            .collect();
        Ok(Self {
            polytope: p.clone(),
            resolution,
            nodes,
            lattice,
            simplices,
            adjacency,
            boundary_faces,
            barycentric,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn simplex_points(&self, s: usize) -> Vec<Point> {
        self.simplices[s].iter().map(|&i| self.nodes[i].clone()).collect()
    }

    fn local_index(&self, s: usize, node: usize) -> usize {
        self.simplices[s].iter().position(|&i| i == node).expect("node of simplex")
    }

    /// The node nearest the vertex barycenter; ties go to the
    /// lexicographically smallest node.
    pub fn base_node(&self) -> usize {
        let b = self.polytope.barycenter_of_vertices();
        let dist = |x: &Point| -> Rational { x.iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum() };
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&i, &j| dist(&self.nodes[i]).cmp(&dist(&self.nodes[j])).then(self.nodes[i].cmp(&self.nodes[j])));
        order[0]
    }

    /// The affine interpolant of `values` on simplex `s`.
    pub fn interpolant(&self, values: &[Rational], s: usize) -> AffineFunction {
        let l = self.polytope.dim();
        let mut out = AffineFunction::zero(l);
        for (lambda, &i) in self.barycentric[s].iter().zip(&self.simplices[s]) {
            out = out.add(&lambda.scale(&values[i]));
        }
        out
    }

    /// Value at `x` of the grid interpolant, as weights on nodal values.
    pub fn evaluation_weights(&self, x: &[Rational]) -> Vec<Rational> {
        let s = (0..self.simplices.len())
            .find(|&s| self.barycentric[s].iter().all(|b| !b.eval(x).is_negative()))
            .expect("point inside the simplex");
        let mut w = vec![Rational::zero(); self.nodes.len()];
        for (lambda, &i) in self.barycentric[s].iter().zip(&self.simplices[s]) {
            w[i] = lambda.eval(x);
        }
        w
    }

    pub fn sample(&self, f: &PLConvexFunction) -> Vec<Rational> {
        self.nodes.iter().map(|x| f.eval(x)).collect()
    }

    /// Rows `r` with `r · values ≤ 0` expressing convexity across each
    /// interior facet.
    pub fn convexity_rows(&self) -> Vec<Vec<Rational>> {
        self.adjacency
            .iter()
            .map(|a| {
                let mut row = vec![Rational::zero(); self.nodes.len()];
                let x = &self.nodes[a.opposite];
                for (lambda, &i) in self.barycentric[a.simplex].iter().zip(&self.simplices[a.simplex]) {
                    row[i] += lambda.eval(x);
                }
                row[a.opposite] -= Rational::one();
                row
            })
            .collect()
    }

    pub fn is_convex(&self, values: &[Rational]) -> bool {
        self.convexity_rows()
            .iter()
            .all(|r| !r.iter().zip(values).map(|(a, b)| a * b).sum::<Rational>().is_positive())
    }
}

fn lattice_points_box(dim: usize, n: usize) -> Vec<Vec<usize>> {
    if dim == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for mut rest in lattice_points_box(dim - 1, n) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exact linear forms in the nodal values.
#[derive(Clone, Debug)]
pub struct LinearForms {
    /// `F_{v,w}(f)`.
    pub futaki: Vec<Rational>,
    /// `∫ f v dx`.
    pub l1: Vec<Rational>,
    /// `∫ f v dx − (∫ v dx) · f(b_v)`.
    pub j: Vec<Rational>,
}

pub fn linear_forms(grid: &ConvexGrid, v: &Polynomial, w: &WeightExpr) -> Result<LinearForms, SearchError> {
    let m = grid.num_nodes();
    let wv = w.paired_with(v)?;
    let mut fut = vec![Rational::zero(); m];
    let mut l1 = vec![Rational::zero(); m];
    for (s, nodes) in grid.simplices.iter().enumerate() {
        let pts = grid.simplex_points(s);
        let vol = simplex_volume(&pts);
        for (lambda, &i) in grid.barycentric[s].iter().zip(nodes) {
            let hat = Polynomial::from_affine(lambda);
            l1[i] += integrate_on_simplex(&(&hat * v), &pts, &vol);
            fut[i] -= integrate_on_simplex(&(&hat * &wv), &pts, &vol);
        }
    }
    let two = Rational::from_integer(BigInt::from(2));
    for face in &grid.boundary_faces {
        let pts: Vec<Point> = face.nodes.iter().map(|&i| grid.nodes[i].clone()).collect();
        let normal = &grid.polytope.labels()[face.label].linear;
        let mass = facet_simplex_mass(&pts, normal);
        for &i in &face.nodes {
            let lambda = &grid.barycentric[face.simplex][grid.local_index(face.simplex, i)];
            let hat = Polynomial::from_affine(lambda);
            fut[i] += &two * integrate_on_simplex(&(&hat * v), &pts, &mass);
        }
    }
    let b = weighted_barycenter(&grid.polytope, v)?;
    let mass: Rational = l1.iter().sum();
    let at_b = grid.evaluation_weights(&b);
    let j = l1.iter().zip(&at_b).map(|(a, e)| a - &mass * e).collect();
    Ok(LinearForms { futaki: fut, l1, j })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaEstimate {
    #[serde(rename = "N")]
    pub resolution: usize,
    #[serde(with = "serde_rational")]
    pub lambda: Rational,
    #[serde(with = "crate::rational::serde_rational_vec")]
    pub values: Vec<Rational>,
    pub base_node: usize,
}

/// Minimizes `F_{v,w}` over nodal values with `f ≥ 0`, `f(x₀) = 0`, grid
/// convexity and unit norm.
pub fn estimate_lambda(
    p: &LabeledPolytope,
    v: &Polynomial,
    w: &WeightExpr,
    resolution: usize,
    norm: Norm,
) -> Result<LambdaEstimate, SearchError> {
    let grid = ConvexGrid::new(p, resolution)?;
    estimate_on_grid(&grid, v, w, norm)
}

pub fn estimate_on_grid(grid: &ConvexGrid, v: &Polynomial, w: &WeightExpr, norm: Norm) -> Result<LambdaEstimate, SearchError> {
    let forms = linear_forms(grid, v, w)?;
    let m = grid.num_nodes();
    let x0 = grid.base_node();
    if !grid.polytope.is_interior(&grid.nodes[x0]) {
        return Err(SearchError::BaseNodeOnBoundary(grid.resolution));
    }
    let mut lp = LinearProgram::new(m, Sense::Minimize);
    lp.set_objective(forms.futaki.clone());
    for row in grid.convexity_rows() {
        lp.add_constraint(row, Relation::LessEq, Rational::zero());
    }
    let mut pin = vec![Rational::zero(); m];
    pin[x0] = Rational::one();
    lp.add_constraint(pin, Relation::Equal, Rational::zero());
    let normalization = match norm {
        Norm::L1Star => forms.l1,
        Norm::J => forms.j,
    };
    lp.add_constraint(normalization, Relation::Equal, Rational::one());
    match lp.solve() {
        LpOutcome::Optimal(sol) => Ok(LambdaEstimate {
            resolution: grid.resolution,
            lambda: sol.objective,
            values: sol.x,
            base_node: x0,
        }),
        LpOutcome::Infeasible => Err(SearchError::LpInfeasible),
        LpOutcome::Unbounded => Err(SearchError::LpUnbounded),
    }
}

/// The convex grid function with the given nodal values, as the maximum of
/// its simplex interpolants.
pub fn extract_destabilizer(grid: &ConvexGrid, values: &[Rational]) -> Result<PLConvexFunction, SearchError> {
    if !grid.is_convex(values) {
        return Err(SearchError::NotConvex);
    }
    let pieces = (0..grid.simplices.len()).map(|s| grid.interpolant(values, s)).collect();
    let f = PLConvexFunction::new(&grid.polytope, pieces)?;
    if f.is_affine() {
        return Err(SearchError::EnvelopeDegenerate);
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub function: PLConvexFunction,
    #[serde(with = "serde_rational")]
    pub futaki: Rational,
    #[serde(with = "serde_rational")]
    pub norm: Rational,
    pub verified: bool,
}

/// Recomputes `F(f)` and `‖f‖` outside the LP.
pub fn verify_certificate(
    p: &LabeledPolytope,
    v: &Polynomial,
    w: &WeightExpr,
    f: PLConvexFunction,
    norm: Norm,
) -> Result<Certificate, SearchError> {
    let fut = futaki(p, v, w, &f)?;
    let size = match norm {
        Norm::L1Star => integrate_pl_product(p, &f, v, Region::Interior).map_err(FunctionalError::from)?,
        Norm::J => j_norm(p, v, &f)?,
    };
    Ok(Certificate {
        verified: !fut.is_positive() && size.is_positive(),
        function: f,
        futaki: fut,
        norm: size,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "destabilized")]
    Destabilized,
    #[serde(rename = "no-destabilizer-found")]
    NoDestabilizerFound,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub norm_used: Norm,
    pub estimates: Vec<LambdaEstimate>,
    pub destabilizer: Option<Certificate>,
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn lambdas(&self) -> Vec<&Rational> {
        self.estimates.iter().map(|e| &e.lambda).collect()
    }

    /// Whether `λ_est` never increases along the listed resolutions.
    pub fn non_increasing(&self) -> bool {
        self.estimates.windows(2).all(|w| w[1].lambda <= w[0].lambda)
    }
}

pub fn stability_search(
    p: &LabeledPolytope,
    v: &Polynomial,
    w: &WeightExpr,
    resolutions: &[usize],
    norm: Norm,
) -> Result<StabilityReport, SearchError> {
    let mut estimates = Vec::new();
    let mut destabilizer = None;
    for &n in resolutions {
        let grid = ConvexGrid::new(p, n)?;
        let est = estimate_on_grid(&grid, v, w, norm)?;
        if destabilizer.is_none() && !est.lambda.is_positive() {
            let f = extract_destabilizer(&grid, &est.values)?;
            destabilizer = Some(verify_certificate(p, v, w, f, norm)?);
        }
        estimates.push(est);
    }
    let verdict = if destabilizer.is_some() { Verdict::Destabilized } else { Verdict::NoDestabilizerFound };
    Ok(StabilityReport {
        norm_used: norm,
        estimates,
        destabilizer,
        verdict,
    })
}

/// Stability search for the base problem `(Δ, pp̄, w̄)` of a bundle.
pub fn bundle_stability(problem: &BundleProblem, resolutions: &[usize], norm: Norm) -> Result<StabilityReport, SearchError> {
    stability_search(problem.delta(), problem.density(), problem.w_bar(), resolutions, norm)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    #[serde(with = "serde_rational")]
    pub c: Rational,
    #[serde(rename = "N")]
    pub resolution: usize,
    pub lambda: Option<String>,
    pub verdict: String,
    pub destabilizer: Option<PLConvexFunction>,
    pub error: Option<String>,
    #[serde(skip)]
    lambda_exact: Option<Rational>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Per resolution, whether `λ_est(c)` is monotone in `c` (when defined).
    pub monotone: BTreeMap<usize, Option<String>>,
    /// Consecutive `c` values between which `λ_est` changes sign.
    pub sign_changes: Vec<SignChange>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignChange {
    #[serde(rename = "N")]
    pub resolution: usize,
    #[serde(with = "serde_rational")]
    pub c_low: Rational,
    #[serde(with = "serde_rational")]
    pub c_high: Rational,
}

/// Worker count from `POLYSTAB_THREADS`, defaulting to rayon's choice.
pub fn thread_count() -> Option<usize> {
    std::env::var("POLYSTAB_THREADS").ok()?.parse().ok().filter(|&n: &usize| n > 0)
}

fn sweep_point(template: &BundleSpec, c: &Rational, resolutions: &[usize], norm: Norm) -> Vec<SweepRow> {
    let mut spec = template.clone();
    spec.c = c.clone();
    let failed = |e: String| {
        resolutions
            .iter()
            .map(|&n| SweepRow {
                c: c.clone(),
                resolution: n,
                lambda: None,
                verdict: "error".into(),
                destabilizer: None,
                error: Some(e.clone()),
                lambda_exact: None,
            })
            .collect()
    };
    let problem = match bundle_problem(&spec) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    resolutions
        .iter()
        .map(|&n| match bundle_stability(&problem, &[n], norm) {
            Ok(report) => {
                let est = &report.estimates[0];
                SweepRow {
                    c: c.clone(),
                    resolution: n,
                    lambda: Some(format_rational(&est.lambda)),
                    verdict: match report.verdict {
                        Verdict::Destabilized => "destabilized".into(),
                        Verdict::NoDestabilizerFound => "no-destabilizer-found".into(),
                    },
                    destabilizer: report.destabilizer.map(|cert| cert.function),
                    error: None,
                    lambda_exact: Some(est.lambda.clone()),
                }
            }
            Err(e) => SweepRow {
                c: c.clone(),
                resolution: n,
                lambda: None,
                verdict: "error".into(),
                destabilizer: None,
                error: Some(e.to_string()),
                lambda_exact: None,
            },
        })
        .collect()
}

/// One bundle problem and LP per `(c, N)`; points run in parallel and
/// per-point errors are recorded in their rows.
pub fn sweep(template: &BundleSpec, c_values: &[Rational], resolutions: &[usize], norm: Norm) -> SweepReport {
    let run = || -> Vec<Vec<SweepRow>> { c_values.par_iter().map(|c| sweep_point(template, c, resolutions, norm)).collect() };
    let per_c = match thread_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(run))
            .unwrap_or_else(|_| run()),
        None => run(),
    };
    let rows: Vec<SweepRow> = per_c.into_iter().flatten().collect();
    let mut monotone = BTreeMap::new();
    let mut sign_changes = Vec::new();
    for &n in resolutions {
        let mut series: Vec<(&Rational, &Rational)> = rows
            .iter()
            .filter(|r| r.resolution == n)
            .filter_map(|r| r.lambda_exact.as_ref().map(|l| (&r.c, l)))
            .collect();
        series.sort();
        let up = series.windows(2).all(|w| w[0].1 <= w[1].1);
        let down = series.windows(2).all(|w| w[0].1 >= w[1].1);
        let trend = match (up, down) {
            _ if series.len() < 2 => None,
            (true, true) => Some("constant".to_string()),
            (true, false) => Some("non-decreasing".to_string()),
            (false, true) => Some("non-increasing".to_string()),
            (false, false) => Some("non-monotone".to_string()),
        };
        monotone.insert(n, trend);
        for w in series.windows(2) {
            if w[0].1.is_positive() != w[1].1.is_positive() {
                sign_changes.push(SignChange {
                    resolution: n,
                    c_low: w[0].0.clone(),
                    c_high: w[1].0.clone(),
                });
            }
        }
    }
    SweepReport {
        rows,
        monotone,
        sign_changes,
    }
}

impl SweepReport {
    /// File name used for the destabilizer of row `i`.
    pub fn destabilizer_ref(&self, i: usize) -> Option<String> {
        self.rows[i].destabilizer.as_ref().map(|_| format!("destabilizer_{i}.json"))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,N,lambda_num,lambda_den,verdict,destabilizer_ref\n");
        for (i, r) in self.rows.iter().enumerate() {
            let (num, den) = match &r.lambda_exact {
                Some(l) => (l.numer().to_string(), l.denom().to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                format_rational(&r.c),
                r.resolution,
                num,
                den,
                r.verdict,
                self.destabilizer_ref(i).unwrap_or_default()
            );
        }
        out
    }

    /// Line chart of `λ_est` against `c`, one polyline per resolution.
    pub fn to_svg(&self) -> String {
        let (width, height, margin) = (640.0, 400.0, 48.0);
        let pts: Vec<(usize, f64, f64)> = self
            .rows
            .iter()
            .filter_map(|r| r.lambda_exact.as_ref().map(|l| (r.resolution, to_f64(&r.c), to_f64(l))))
            .collect();
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
        );
        if pts.is_empty() {
            svg.push_str("</svg>\n");
            return svg;
        }
        let fold = |f: fn(f64, f64) -> f64, sel: fn(&(usize, f64, f64)) -> f64, init: f64| pts.iter().map(sel).fold(init, f);
        let (x0, x1) = (fold(f64::min, |p| p.1, f64::INFINITY), fold(f64::max, |p| p.1, f64::NEG_INFINITY));
        let (y0, y1) = (fold(f64::min, |p| p.2, 0.0), fold(f64::max, |p| p.2, 0.0));
        let sx = |x: f64| margin + (x - x0) / (x1 - x0).max(1e-12) * (width - 2.0 * margin);
        let sy = |y: f64| height - margin - (y - y0) / (y1 - y0).max(1e-12) * (height - 2.0 * margin);
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#999\"/>",
            margin,
            sy(0.0),
            width - margin,
            sy(0.0)
        );
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
        let mut resolutions: Vec<usize> = pts.iter().map(|p| p.0).collect();
        resolutions.dedup();
        resolutions.sort_unstable();
        resolutions.dedup();
        for (k, n) in resolutions.iter().enumerate() {
            let mut line: Vec<(f64, f64)> = pts.iter().filter(|p| p.0 == *n).map(|p| (p.1, p.2)).collect();
            line.sort_by(|a, b| a.0.total_cmp(&b.0));
            let path: Vec<String> = line.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"><title>N={}</title></polyline>",
                colors[k % colors.len()],
                path.join(" "),
                n
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">c</text><text x=\"8\" y=\"{}\" font-size=\"12\">lambda</text>",
            width / 2.0,
            height - 12.0,
            margin / 2.0
        );
        svg.push_str("</svg>\n");
        svg
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn interval() -> LabeledPolytope {
        LabeledPolytope::standard_simplex(1)
    }

    #[test]
    fn grid_tiles_the_simplex() {
        for (l, n) in [(1, 4), (2, 4), (3, 3)] {
            let p = LabeledPolytope::standard_simplex(l);
            let g = ConvexGrid::new(&p, n).unwrap();
            let total: Rational = (0..g.simplices.len()).map(|s| simplex_volume(&g.simplex_points(s))).sum();
            assert_eq!(total, p.volume());
            assert_eq!(g.simplices.len(), n.pow(l as u32));
            for v in p.vertices() {
                assert!(g.nodes.contains(v));
            }
        }
    }

    #[test]
    fn forms_match_exact_functionals() {
        let p = LabeledPolytope::standard_simplex(2);
        let g = ConvexGrid::new(&p, 4).unwrap();
        let v = &Polynomial::constant(2, int(2)) - &Polynomial::variable(2, 0);
        let w = WeightExpr::polynomial(&Polynomial::constant(2, int(3)) + &Polynomial::variable(2, 1));
        let f = PLConvexFunction::new(
            &p,
            vec![
                AffineFunction::zero(2),
                AffineFunction::from_integers(&[2, 0], rat(-1, 1)),
                AffineFunction::from_integers(&[2, 2], rat(-3, 2)),
            ],
        )
        .unwrap();
        let values = g.sample(&f);
        assert!(g.is_convex(&values));
        let forms = linear_forms(&g, &v, &w).unwrap();
        let dot = |a: &[Rational]| -> Rational { a.iter().zip(&values).map(|(x, y)| x * y).sum() };
        assert_eq!(dot(&forms.futaki), futaki(&p, &v, &w, &f).unwrap());
        assert_eq!(dot(&forms.l1), integrate_pl_product(&p, &f, &v, Region::Interior).unwrap());
        assert_eq!(dot(&forms.j), j_norm(&p, &v, &f).unwrap());
    }

    #[test]
    fn projective_line_matches_hinge_oracle() {
        // At N = 4 the normalized cone is spanned by the hinges at the
        // grid nodes, so the LP minimum is the best hinge ratio.
        let p = interval();
        let v = Polynomial::one(1);
        let w = WeightExpr::constant(1, int(4));
        let est = estimate_lambda(&p, &v, &w, 4, Norm::L1Star).unwrap();
        let hinges = [
            AffineFunction::from_integers(&[1], rat(-1, 2)),
            AffineFunction::from_integers(&[1], rat(-3, 4)),
            AffineFunction::from_integers(&[-1], rat(1, 2)),
            AffineFunction::from_integers(&[-1], rat(1, 4)),
        ];
        let best = hinges
            .iter()
            .map(|h| {
                let f = PLConvexFunction::new(&p, vec![AffineFunction::zero(1), h.clone()]).unwrap();
                futaki(&p, &v, &w, &f).unwrap() / integrate_pl_product(&p, &f, &v, Region::Interior).unwrap()
            })
            .min()
            .unwrap();
        assert_eq!(est.lambda, best);
        assert!(est.lambda.is_positive());
        let report = stability_search(&p, &v, &w, &[4, 8, 16], Norm::L1Star).unwrap();
        assert!(report.non_increasing());
        assert_eq!(report.verdict, Verdict::NoDestabilizerFound);
        let j = stability_search(&p, &v, &w, &[4, 8], Norm::J).unwrap();
        assert!(j.lambdas().iter().all(|l| l.is_positive()));
    }

    #[test]
    fn envelope_of_hinge() {
        let p = interval();
        let g = ConvexGrid::new(&p, 4).unwrap();
        let f = PLConvexFunction::new(&p, vec![AffineFunction::zero(1), AffineFunction::from_integers(&[2], int(-1))]).unwrap();
        assert_eq!(extract_destabilizer(&g, &g.sample(&f)).unwrap(), f);
        let affine = PLConvexFunction::affine(AffineFunction::from_integers(&[1], int(0)));
        assert_eq!(extract_destabilizer(&g, &g.sample(&affine)), Err(SearchError::EnvelopeDegenerate));
    }

    #[test]
    fn non_extremal_weight_is_destabilized() {
        let p = interval();
        let v = Polynomial::one(1);
        let w = WeightExpr::polynomial(&Polynomial::constant(1, int(4)) + &Polynomial::variable(1, 0).scale(&int(6)));
        let report = stability_search(&p, &v, &w, &[4], Norm::L1Star).unwrap();
        assert_eq!(report.verdict, Verdict::Destabilized);
        let cert = report.destabilizer.unwrap();
        assert!(cert.verified);
        assert_eq!(cert.futaki, &report.estimates[0].lambda * &cert.norm);
    }

    #[test]
    fn coarse_triangle_grid_is_rejected() {
        let p = LabeledPolytope::standard_simplex(2);
        let v = Polynomial::one(2);
        let w = WeightExpr::constant(2, int(6));
        assert_eq!(estimate_lambda(&p, &v, &w, 2, Norm::L1Star), Err(SearchError::BaseNodeOnBoundary(2)));
        assert_eq!(
            estimate_lambda(&LabeledPolytope::unit_cube(2), &v, &w, 4, Norm::L1Star),
            Err(SearchError::NotStandardSimplex)
        );
    }

    #[test]
    fn hirzebruch_sweep() {
        let template = BundleSpec::new(0, &[(1, 0), (1, 1)], int(2));
        let cs = [rat(11, 10), int(2), int(8)];
        let report = sweep(&template, &cs, &[4, 8], Norm::L1Star);
        assert_eq!(report.rows.len(), 6);
        assert!(report.rows.iter().all(|r| r.error.is_none() && r.lambda_exact.as_ref().unwrap().is_positive()));
        assert!(report.sign_changes.is_empty());
        let csv = report.to_csv();
        assert!(csv.starts_with("c,N,lambda_num,lambda_den,verdict,destabilizer_ref\n11/10,4,"));
        assert!(report.to_svg().contains("<polyline"));
    }
}

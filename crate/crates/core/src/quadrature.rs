//! Adaptive floating-point cubature on polytopes.
//!
//! Each simplex carries Grundmann–Möller rules of degrees 9, 7 and 5. The
//! local error estimate is `|Q₉ − Q₇|` when it is well below `|Q₇ − Q₅|`
//! and the larger difference otherwise; the worst simplex is bisected along
//! its longest edge. All rule nodes lie in the open simplex, so
//! integrands only defined on the open interior are never sampled on facets.

use crate::polytope::LabeledPolytope;
use crate::rational::to_f64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Estimate of `∫|f|`. Errors below `ROUNDOFF · magnitude` count as
    /// converged, since cancellation in `f` limits any smaller target.
    pub magnitude: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum QuadError {
    #[error("tolerance not reached (best value {}, estimated error {})", .0.value, .0.error_estimate)]
    ToleranceNotReached(QuadResult),
    #[error("evaluator failed at {0:?}")]
    EvaluatorFailure(Vec<f64>),
    #[error("relative tolerance must be positive")]
    InvalidTolerance,
}

#[derive(Clone, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: usize,
}

impl QuadOptions {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 0.0,
            max_evaluations: 20_000_000,
        }
    }
}

/// Nodes `(weight, barycentric)` of the Grundmann–Möller rule of degree
/// `2s + 1` on the `n`-simplex; weights sum to 1.
pub fn grundmann_moller(n: usize, s: usize) -> Vec<(f64, Vec<f64>)> {
    let d = 2 * s + 1;
    let fact = |k: usize| -> f64 { (1..=k).map(|i| i as f64).product() };
    let nfact = fact(n);
    let mut out = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32) / (fact(i) * fact(d + n - i))
            * nfact;
        for beta in compositions(s - i, n + 1) {
            let bary = beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect();
            out.push((w, bary));
        }
    }
    out
}

/// All `parts`-tuples of nonnegative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

struct Rules {
    high: Vec<(f64, Vec<f64>)>,
    mid: Vec<(f64, Vec<f64>)>,
    low: Vec<(f64, Vec<f64>)>,
}

struct Piece {
    vertices: Vec<Vec<f64>>,
    value: f64,
    error: f64,
    magnitude: f64,
    order: usize,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.order.cmp(&self.order))
    }
}

fn volume_f64(vs: &[Vec<f64>]) -> f64 {
    let n = vs.len() - 1;
    if n == 0 {
        return 1.0;
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| vs[i + 1][j] - vs[0][j]);
    m.determinant().abs() / (1..=n).map(|i| i as f64).product::<f64>()
}

/// Evaluates at `x`; on a non-finite value, retries at
/// `c + (1 − 2^{−k})(x − c)` toward the simplex centroid `c` for decreasing `k`.
fn sample<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], c: &[f64], evals: &mut usize) -> Result<f64, QuadError> {
    *evals += 1;
    let y = f(x);
    if y.is_finite() {
        return Ok(y);
    }
    for k in (1..=52).rev() {
        let t = 1.0 - 2f64.powi(-k);
        let z: Vec<f64> = x.iter().zip(c).map(|(xi, ci)| ci + t * (xi - ci)).collect();
        *evals += 1;
        let y = f(&z);
        if y.is_finite() {
            return Ok(y);
        }
    }
    Err(QuadError::EvaluatorFailure(x.to_vec()))
}

fn apply<F: Fn(&[f64]) -> f64>(
    f: &F,
    rules: &Rules,
    vs: &[Vec<f64>],
    evals: &mut usize,
) -> Result<(f64, f64, f64), QuadError> {
    let dim = vs[0].len();
    let vol = volume_f64(vs);
    let c: Vec<f64> = (0..dim)
        .map(|j| vs.iter().map(|v| v[j]).sum::<f64>() / vs.len() as f64)
        .collect();
    let point = |bary: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|j| bary.iter().zip(vs).map(|(b, v)| b * v[j]).sum())
            .collect()
    };
    let (mut high, mut magnitude) = (0.0, 0.0);
    for (w, b) in &rules.high {
        let y = sample(f, &point(b), &c, evals)?;
        high += w * y;
        magnitude += (w * y).abs();
    }
    let mut rule = |nodes: &[(f64, Vec<f64>)]| -> Result<f64, QuadError> {
        nodes.iter().try_fold(0.0, |acc, (w, b)| Ok(acc + w * sample(f, &point(b), &c, evals)?))
    };
    let mid = rule(&rules.mid)?;
    let low = rule(&rules.low)?;
    let (fine, coarse) = ((high - mid).abs(), (mid - low).abs());
    let error = if fine <= 0.1 * coarse { fine } else { fine.max(coarse) };
    Ok((vol * high, vol * error, vol * magnitude))
}

fn bisect(vs: &[Vec<f64>]) -> [Vec<Vec<f64>>; 2] {
    let mut best = (0, 1, -1.0);
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, _) = best;
    let mid: Vec<f64> = vs[i].iter().zip(&vs[j]).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut left = vs.to_vec();
    left[j] = mid.clone();
    let mut right = vs.to_vec();
    right[i] = mid;
    [left, right]
}

/// Adaptive integral of `f` over `P` against `dx`.
pub fn quad_adaptive<F: Fn(&[f64]) -> f64>(
    p: &LabeledPolytope,
    f: F,
    options: &QuadOptions,
) -> Result<QuadResult, QuadError> {
    let simplices: Vec<Vec<Vec<f64>>> = p
        .triangulate()
        .iter()
        .map(|s| s.iter().map(|v| v.iter().map(to_f64).collect()).collect())
        .collect();
    quad_simplices(&simplices, f, options)
}

/// Adaptive integral of `f` over a union of full-dimensional simplices.
pub fn quad_simplices<F: Fn(&[f64]) -> f64>(
    simplices: &[Vec<Vec<f64>>],
    f: F,
    options: &QuadOptions,
) -> Result<QuadResult, QuadError> {
    if options.rel_tol.is_nan() || options.rel_tol <= 0.0 {
        return Err(QuadError::InvalidTolerance);
    }
    let n = simplices.first().map_or(0, |s| s.len() - 1);
    let rules = Rules {
        high: grundmann_moller(n, 4),
        mid: grundmann_moller(n, 3),
        low: grundmann_moller(n, 2),
    };
    let mut evals = 0;
    let mut order = 0;
    let mut heap = BinaryHeap::new();
    let (mut value, mut error, mut magnitude) = (0.0, 0.0, 0.0);
    for s in simplices {
        let (v, e, m) = apply(&f, &rules, s, &mut evals)?;
        value += v;
        error += e;
        magnitude += m;
        heap.push(Piece {
            vertices: s.clone(),
            value: v,
            error: e,
            magnitude: m,
            order,
        });
        order += 1;
    }
    let target = |value: f64, magnitude: f64| {
        (options.rel_tol * value.abs()).max(options.abs_tol).max(ROUNDOFF * magnitude)
    };
    while error > target(value, magnitude) && evals < options.max_evaluations {
        let Some(worst) = heap.pop() else { break };
        value -= worst.value;
        error -= worst.error;
        magnitude -= worst.magnitude;
        for child in bisect(&worst.vertices) {
            let (v, e, m) = apply(&f, &rules, &child, &mut evals)?;
            value += v;
            error += e;
            magnitude += m;
            heap.push(Piece {
                vertices: child,
                value: v,
                error: e,
                magnitude: m,
                order,
            });
            order += 1;
        }
        if heap.len() % 4096 == 0 {
            // Refresh running sums against cancellation drift.
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
            magnitude = heap.iter().map(|p| p.magnitude).sum();
        }
    }
    let result = QuadResult {
        value,
        error_estimate: error.max(0.0),
        magnitude,
        evaluations: evals,
        converged: error <= target(value, magnitude),
    };
    if result.converged {
        Ok(result)
    } else {
        Err(QuadError::ToleranceNotReached(result))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_monomials() {
        for n in 1..=4 {
            for s in 0..=3 {
                let rule = grundmann_moller(n, s);
                let total: f64 = rule.iter().map(|(w, _)| w).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
        // Degree 7 exact for λ_0^3 λ_1^4 on the 2-simplex: 3!4!/(2+7)! · 2!.
        let rule = grundmann_moller(2, 3);
        let q: f64 = rule.iter().map(|(w, b)| w * b[0].powi(3) * b[1].powi(4)).sum();
        assert!((q - 6.0 * 24.0 * 2.0 / 362880.0).abs() < 1e-15);
    }

    #[test]
    fn examples() {
        let t = LabeledPolytope::standard_simplex(2);
        let r = quad_adaptive(&t, |_| 1.0, &QuadOptions::new(1e-10)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-10);
        let r = quad_adaptive(&t, |x| x[0] * x[1], &QuadOptions::new(1e-8)).unwrap();
        assert!((r.value - 1.0 / 24.0).abs() < 1e-8 / 24.0);
        let i = LabeledPolytope::standard_simplex(1);
        let r = quad_adaptive(&i, |x| (x[0] * (1.0 - x[0])).ln() + 4f64.ln(), &QuadOptions::new(1e-6))
            .unwrap();
        let exact = -2.0 + 2.0 * 2f64.ln();
        assert!(((r.value - exact) / exact).abs() < 1e-6, "{}", r.value);
        let r = quad_adaptive(&t, |x| x[0] - x[1], &QuadOptions::new(1e-10)).unwrap();
        assert!(r.value.abs() <= ROUNDOFF * r.magnitude && r.evaluations < 1000, "{r:?}");
    }

    #[test]
    fn failures_are_reported() {
        let i = LabeledPolytope::standard_simplex(1);
        assert!(matches!(
            quad_adaptive(&i, |_| f64::NAN, &QuadOptions::new(1e-6)),
            Err(QuadError::EvaluatorFailure(_))
        ));
        let mut opts = QuadOptions::new(1e-14);
        opts.max_evaluations = 50;
        assert!(matches!(
            quad_adaptive(&i, |x| x[0].sqrt(), &opts),
            Err(QuadError::ToleranceNotReached(r)) if !r.converged
        ));
        assert_eq!(
            quad_adaptive(&i, |_| 1.0, &QuadOptions::new(0.0)),
            Err(QuadError::InvalidTolerance)
        );
    }
}

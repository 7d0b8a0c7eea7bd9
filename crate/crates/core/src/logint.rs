//! Exact integrals of `q · log B` for polynomial `q` and affine `B ≥ 0`.
//!
//! Values live in `ℚ ⊕ ⊕_p ℚ·log p`. On a simplex, `V(t) = ∫_{B ≤ t} q` is a
//! polynomial in `t` between consecutive vertex values of `B`, so
//! `∫ q log B = ∫ log t dV(t)` reduces to `∫ t^m log t` primitives once each
//! polynomial piece is recovered by exact interpolation.

use crate::affine::AffineFunction;
use crate::integrate::{facet_simplex_mass, integrate_cell, pullback_to_simplex, simplex_volume};
use crate::linalg::solve;
use crate::poly::Polynomial;
use crate::polytope::{Cell, LabeledPolytope, Point};
use crate::rational::{factorial, format_rational, to_f64, Rational};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogIntegralError {
    #[error("log argument is negative on the domain")]
    NegativeArgument,
    #[error("log argument vanishes identically on the domain")]
    VanishingArgument,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// `rational + Σ_p coef_p · log p` over primes `p`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LogValue {
    pub rational: Rational,
    pub logs: BTreeMap<BigInt, Rational>,
}

fn factor(mut n: BigInt) -> Vec<(BigInt, u32)> {
    let mut out = Vec::new();
    if let Some(mut m) = n.to_u64() {
        let mut p = 2u64;
        while p * p <= m {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            if e > 0 {
                out.push((BigInt::from(p), e));
            }
            p += if p == 2 { 1 } else { 2 };
        }
        if m > 1 {
            out.push((BigInt::from(m), 1));
        }
        return out;
    }
    let mut p = BigInt::from(2);
    while &p * &p <= n {
        let mut e = 0;
        while n.is_multiple_of(&p) {
            n /= &p;
            e += 1;
        }
        if e > 0 {
            out.push((p.clone(), e));
        }
        p += 1;
    }
    if n > BigInt::one() {
        out.push((n, 1));
    }
    out
}

impl LogValue {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_rational(r: Rational) -> Self {
        Self {
            rational: r,
            logs: BTreeMap::new(),
        }
    }

    /// `log r` for `r > 0`.
    pub fn log_of(r: &Rational) -> Self {
        assert!(r.is_positive(), "log of a nonpositive rational");
        let mut out = Self::zero();
        for (p, e) in factor(r.numer().clone()) {
            out.add_log(p, Rational::from_integer(BigInt::from(e)));
        }
        for (p, e) in factor(r.denom().clone()) {
            out.add_log(p, -Rational::from_integer(BigInt::from(e)));
        }
        out
    }

    fn add_log(&mut self, p: BigInt, c: Rational) {
        let entry = self.logs.entry(p).or_insert_with(Rational::zero);
        *entry += c;
        if entry.is_zero() {
            self.logs.retain(|_, v| !v.is_zero());
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.logs.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.logs.is_empty()
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            rational: &self.rational * s,
            logs: self.logs.iter().map(|(p, c)| (p.clone(), c * s)).collect(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        let logs: f64 = self
            .logs
            .iter()
            .map(|(p, c)| to_f64(c) * p.to_f64().expect("prime fits in f64").ln())
            .sum();
        to_f64(&self.rational) + logs
    }
}

impl Add<&LogValue> for &LogValue {
    type Output = LogValue;
    fn add(self, rhs: &LogValue) -> LogValue {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&LogValue> for LogValue {
    fn add_assign(&mut self, rhs: &LogValue) {
        self.rational += &rhs.rational;
        for (p, c) in &rhs.logs {
            self.add_log(p.clone(), c.clone());
        }
    }
}

impl Neg for &LogValue {
    type Output = LogValue;
    fn neg(self) -> LogValue {
        self.scale(&-Rational::one())
    }
}

impl Sub<&LogValue> for &LogValue {
    type Output = LogValue;
    fn sub(self, rhs: &LogValue) -> LogValue {
        self + &(-rhs)
    }
}

impl std::iter::Sum for LogValue {
    fn sum<I: Iterator<Item = LogValue>>(iter: I) -> Self {
        iter.fold(LogValue::zero(), |mut acc, x| {
            acc += &x;
            acc
        })
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_rational(&self.rational))?;
        for (p, c) in &self.logs {
            write!(f, " + ({}) log {}", format_rational(c), p)?;
        }
        Ok(())
    }
}

impl Serialize for LogValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let logs: Vec<BTreeMap<&str, String>> = self
            .logs
            .iter()
            .map(|(p, c)| BTreeMap::from([("prime", p.to_string()), ("coef", format_rational(c))]))
            .collect();
        let mut st = s.serialize_struct("LogValue", 3)?;
        st.serialize_field("rational", &format_rational(&self.rational))?;
        st.serialize_field("logs", &logs)?;
        st.serialize_field("value", &self.to_f64())?;
        st.end()
    }
}

/// `∫_a^b t^m log t dt`, with `a ≥ 0`.
fn power_log_integral(m: u32, a: &Rational, b: &Rational) -> LogValue {
    let k = Rational::from_integer(BigInt::from(m + 1));
    let prim = |t: &Rational| -> LogValue {
        if t.is_zero() {
            return LogValue::zero();
        }
        let tk = num_traits::pow(t.clone(), (m + 1) as usize);
        let mut v = LogValue::log_of(t).scale(&(&tk / &k));
        v.rational -= &tk / (&k * &k);
        v
    };
    &prim(b) - &prim(a)
}

/// Coefficients `c_0..c_d` of the polynomial through `(t_i, y_i)`.
fn interpolate(ts: &[Rational], ys: &[Rational]) -> Vec<Rational> {
    let rows: Vec<Vec<Rational>> = ts
        .iter()
        .map(|t| {
            (0..ts.len())
                .map(|j| num_traits::pow(t.clone(), j))
                .collect()
        })
        .collect();
    solve(&rows, ys).expect("distinct interpolation nodes")
}

/// `∫_S q log B dμ` on a simplex `S` carrying `mass` times normalized Lebesgue
/// measure on its affine hull.
pub fn integrate_log_on_simplex(
    q: &Polynomial,
    b: &AffineFunction,
    simplex: &[Point],
    mass: &Rational,
) -> Result<LogValue, LogIntegralError> {
    let values: Vec<Rational> = simplex.iter().map(|v| b.eval(v)).collect();
    if values.iter().any(|v| v.is_negative()) {
        return Err(LogIntegralError::NegativeArgument);
    }
    if values.iter().all(|v| v.is_zero()) {
        return Err(LogIntegralError::VanishingArgument);
    }
    if q.is_zero() || mass.is_zero() {
        return Ok(LogValue::zero());
    }
    let k = simplex.len() - 1;
    let first = &values[0];
    if values.iter().all(|v| v == first) {
        let total = crate::integrate::integrate_on_simplex(q, simplex, mass);
        return Ok(LogValue::log_of(first).scale(&total));
    }
    // Barycentric-type coordinates λ on the standard k-simplex; dμ = k!·mass·dλ.
    let q_std = pullback_to_simplex(q, simplex);
    let b_std = AffineFunction::new(
        values[1..].iter().map(|v| v - first).collect(),
        first.clone(),
    );
    let std_labels = LabeledPolytope::standard_simplex(k).labels().to_vec();
    let jac = Rational::from_integer(factorial(k)) * mass;
    let cumulative = |t: &Rational| -> Rational {
        let mut cs = std_labels.clone();
        cs.push(AffineFunction::constant_fn(k, t.clone()).sub(&b_std));
        integrate_cell(&Cell::new(k, cs), &q_std)
    };
    let mut breaks = values.clone();
    breaks.sort();
    breaks.dedup();
    let deg = q_std.degree() as usize + k;
    let mut total = LogValue::zero();
    for w in breaks.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let ts: Vec<Rational> = (0..=deg)
            .map(|i| lo + (hi - lo) * Rational::new(BigInt::from(i), BigInt::from(deg)))
            .collect();
        let ys: Vec<Rational> = ts.iter().map(&cumulative).collect();
        let coeffs = interpolate(&ts, &ys);
        for (m, c) in coeffs.iter().enumerate().skip(1) {
            if c.is_zero() {
                continue;
            }
            let dc = c * Rational::from_integer(BigInt::from(m));
            total += &power_log_integral((m - 1) as u32, lo, hi).scale(&dc);
        }
    }
    Ok(total.scale(&jac))
}

/// `∫ q · B log B` on a simplex, zero when `B` vanishes on it.
pub fn integrate_xlogx_on_simplex(
    q: &Polynomial,
    b: &AffineFunction,
    simplex: &[Point],
    mass: &Rational,
) -> Result<LogValue, LogIntegralError> {
    if simplex.iter().all(|v| b.eval(v).is_zero()) {
        return Ok(LogValue::zero());
    }
    let qb = q * &Polynomial::from_affine(b);
    integrate_log_on_simplex(&qb, b, simplex, mass)
}

fn check_dims(p: &LabeledPolytope, q: &Polynomial, b: &AffineFunction) -> Result<(), LogIntegralError> {
    for found in [q.dim(), b.dim()] {
        if found != p.dim() {
            return Err(LogIntegralError::DimensionMismatch {
                expected: p.dim(),
                found,
            });
        }
    }
    Ok(())
}

/// `∫_P q · B log B dx`.
pub fn integrate_xlogx(p: &LabeledPolytope, q: &Polynomial, b: &AffineFunction) -> Result<LogValue, LogIntegralError> {
    check_dims(p, q, b)?;
    p.triangulate()
        .iter()
        .map(|s| integrate_xlogx_on_simplex(q, b, s, &simplex_volume(s)))
        .sum()
}

/// `∫_{∂P} q · B log B dσ`, per facet.
pub fn integrate_xlogx_boundary(
    p: &LabeledPolytope,
    q: &Polynomial,
    b: &AffineFunction,
) -> Result<Vec<LogValue>, LogIntegralError> {
    check_dims(p, q, b)?;
    (0..p.labels().len())
        .map(|k| {
            let normal = &p.labels()[k].linear;
            p.cell()
                .triangulate_face(k)
                .iter()
                .map(|s| integrate_xlogx_on_simplex(q, b, s, &facet_simplex_mass(s, normal)))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn ln(x: f64) -> f64 {
        x.ln()
    }

    #[test]
    fn log_values() {
        let v = LogValue::log_of(&rat(12, 5));
        assert_eq!(v.logs.len(), 3);
        assert!((v.to_f64() - ln(2.4)).abs() < 1e-14);
        let w = &v - &LogValue::log_of(&rat(12, 5));
        assert!(w.is_zero());
        assert!(LogValue::log_of(&int(1)).is_zero());
    }

    #[test]
    fn interval_examples() {
        let i = LabeledPolytope::standard_simplex(1);
        let x = AffineFunction::coordinate(1, 0);
        // ∫_0^1 x log x = −1/4.
        let v = integrate_xlogx(&i, &Polynomial::one(1), &x).unwrap();
        assert_eq!(v, LogValue::from_rational(rat(-1, 4)));
        // ∫_0^1 x^2 · x log x = −1/16.
        let v = integrate_xlogx(&i, &Polynomial::variable(1, 0).pow(2), &x).unwrap();
        assert_eq!(v, LogValue::from_rational(rat(-1, 16)));
        // Boundary: x log x vanishes at both endpoints.
        let b = integrate_xlogx_boundary(&i, &Polynomial::one(1), &x).unwrap();
        assert!(b.iter().all(LogValue::is_zero));
        // ∫_0^1 (x+1) log(x+1) = 2 log 2 − 3/4.
        let y = AffineFunction::from_integers(&[1], int(1));
        let v = integrate_xlogx(&i, &Polynomial::one(1), &y).unwrap();
        assert!((v.to_f64() - (2.0 * ln(2.0) - 0.75)).abs() < 1e-14);
        assert_eq!(v.rational, rat(-3, 4));
        assert_eq!(v.logs.get(&BigInt::from(2)), Some(&int(2)));
    }

    #[test]
    fn triangle_against_quadrature_values() {
        let t = LabeledPolytope::standard_simplex(2);
        let x1 = AffineFunction::coordinate(2, 0);
        // ∫_T x log x = ∫_0^1 (1−x) x log x dx = −1/4 + 1/9 = −5/36.
        let v = integrate_xlogx(&t, &Polynomial::one(2), &x1).unwrap();
        assert_eq!(v, LogValue::from_rational(rat(-5, 36)));
        // Slanted label L = 1 − x − y: same value by symmetry.
        let l0 = t.labels()[0].clone();
        let v0 = integrate_xlogx(&t, &Polynomial::one(2), &l0).unwrap();
        assert_eq!(v0, v);
        // On the facet x_2 = 0 (dσ = dx_1): ∫_0^1 x log x = −1/4.
        let b = integrate_xlogx_boundary(&t, &Polynomial::one(2), &x1).unwrap();
        let sum: LogValue = b.into_iter().sum();
        // Facets x_2 = 0 and 1 − x_1 − x_2 = 0 each give −1/4.
        assert_eq!(sum, LogValue::from_rational(rat(-1, 2)));
    }

    #[test]
    fn errors() {
        let i = LabeledPolytope::standard_simplex(1);
        let neg = AffineFunction::from_integers(&[1], rat(-1, 2));
        assert_eq!(
            integrate_xlogx(&i, &Polynomial::one(1), &neg),
            Err(LogIntegralError::NegativeArgument)
        );
        let seg = vec![vec![int(0)], vec![int(1)]];
        assert_eq!(
            integrate_log_on_simplex(&Polynomial::one(1), &AffineFunction::zero(1), &seg, &int(1)),
            Err(LogIntegralError::VanishingArgument)
        );
    }
}

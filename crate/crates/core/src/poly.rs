//! Sparse multivariate polynomials with rational coefficients.

use crate::affine::AffineFunction;
use crate::rational::{format_rational, parse_rational, to_f64, Rational};
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        Self::monomial(dim, vec![0; dim], c)
    }

    pub fn one(dim: usize) -> Self {
        Self::constant(dim, Rational::one())
    }

    pub fn variable(dim: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[k] = 1;
        Self::monomial(dim, e, Rational::one())
    }

    pub fn monomial(dim: usize, exp: Vec<u32>, coef: Rational) -> Self {
        assert_eq!(exp.len(), dim, "exponent length must equal dimension");
        let mut p = Self::zero(dim);
        if !coef.is_zero() {
            p.terms.insert(exp, coef);
        }
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, Rational)>) -> Self {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            assert_eq!(e.len(), dim, "exponent length must equal dimension");
            p.add_term(e, c);
        }
        p
    }

    pub fn from_affine(a: &AffineFunction) -> Self {
        let dim = a.dim();
        let mut p = Self::constant(dim, a.constant.clone());
        for (k, c) in a.linear.iter().enumerate() {
            let mut e = vec![0; dim];
            e[k] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn coefficient(&self, exp: &[u32]) -> Rational {
        self.terms.get(exp).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&vec![0; self.dim])
    }

    /// `Some(c)` when the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<Rational> {
        if self.terms.keys().all(|e| e.iter().all(|&a| a == 0)) {
            Some(self.constant_term())
        } else {
            None
        }
    }

    /// Whether variable `k` occurs in some term.
    pub fn depends_on(&self, k: usize) -> bool {
        self.terms.keys().any(|e| e[k] > 0)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero(self.dim);
        }
        Self {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.dim);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        assert_eq!(x.len(), self.dim);
        let mut total = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &a) in x.iter().zip(e) {
                if a > 0 {
                    t *= num_traits::pow(xi.clone(), a as usize);
                }
            }
            total += t;
        }
        total
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(to_f64(c), |t, (&a, xi)| t * xi.powi(a as i32))
            })
            .sum()
    }

    pub fn derivative(&self, k: usize) -> Self {
        let mut p = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[k] -= 1;
            p.add_term(e2, c * Rational::from_integer(e[k].into()));
        }
        p
    }

    /// Composition `self(images[0], …, images[dim-1])`; all images share a
    /// dimension, which becomes the result's dimension.
    pub fn substitute(&self, images: &[Polynomial]) -> Self {
        assert_eq!(images.len(), self.dim);
        let out_dim = images.first().map_or(0, |p| p.dim);
        let mut cache: Vec<Vec<Polynomial>> = images.iter().map(|p| vec![Self::one(p.dim), p.clone()]).collect();
        let mut out = Self::zero(out_dim);
        for (e, c) in &self.terms {
            let mut t = Self::constant(out_dim, c.clone());
            for (k, &a) in e.iter().enumerate() {
                let a = a as usize;
                while cache[k].len() <= a {
                    let next = &cache[k][cache[k].len() - 1] * &images[k];
                    cache[k].push(next);
                }
                if a > 0 {
                    t = &t * &cache[k][a];
                }
            }
            out = &out + &t;
        }
        out
    }

    /// Composition with affine images.
    pub fn substitute_affine(&self, images: &[AffineFunction]) -> Self {
        let polys: Vec<Polynomial> = images.iter().map(Polynomial::from_affine).collect();
        self.substitute(&polys)
    }

    /// The same polynomial viewed in `new_dim ≥ dim` variables, placing
    /// variable `k` at position `positions[k]`.
    pub fn embed(&self, new_dim: usize, positions: &[usize]) -> Self {
        let mut p = Self::zero(new_dim);
        for (e, c) in &self.terms {
            let mut e2 = vec![0; new_dim];
            for (k, &a) in e.iter().enumerate() {
                e2[positions[k]] += a;
            }
            p.add_term(e2, c.clone());
        }
        p
    }

    /// Exact quotient by an affine function, or `None` if it does not divide.
    pub fn div_affine(&self, a: &AffineFunction) -> Option<Self> {
        assert_eq!(a.dim(), self.dim);
        let Some(k) = a.linear.iter().position(|c| !c.is_zero()) else {
            if a.constant.is_zero() {
                return None;
            }
            return Some(self.scale(&a.constant.recip()));
        };
        let lead_inv = a.linear[k].recip();
        let divisor = Self::from_affine(a);
        let mut rest = self.clone();
        let mut quotient = Self::zero(self.dim);
        loop {
            let top = rest.terms.keys().map(|e| e[k]).max().unwrap_or(0);
            if top == 0 {
                break;
            }
            let mut q = Self::zero(self.dim);
            for (e, c) in rest.terms.iter().filter(|(e, _)| e[k] == top) {
                let mut e2 = e.clone();
                e2[k] -= 1;
                q.add_term(e2, c * &lead_inv);
            }
            rest = &rest - &(&q * &divisor);
            quotient = &quotient + &q;
        }
        rest.is_zero().then_some(quotient)
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in polynomial sum");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in polynomial product");
        let mut acc: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert_with(Rational::zero) += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Polynomial {
            dim: self.dim,
            terms: acc,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    exp: Vec<u32>,
    coef: String,
}

#[derive(Serialize, Deserialize)]
struct PolynomialJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    terms: Vec<TermJson>,
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolynomialJson {
            dim: Some(self.dim),
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    exp: e.clone(),
                    coef: format_rational(c),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = PolynomialJson::deserialize(d)?;
        let dim = match (raw.dim, raw.terms.first()) {
            (Some(n), _) => n,
            (None, Some(t)) => t.exp.len(),
            (None, None) => return Err(D::Error::custom("empty polynomial needs an explicit dim")),
        };
        let mut p = Polynomial::zero(dim);
        for t in raw.terms {
            if t.exp.len() != dim {
                return Err(D::Error::custom("exponent length differs from dim"));
            }
            let c = parse_rational(&t.coef).map_err(D::Error::custom)?;
            p.add_term(t.exp, c);
        }
        Ok(p)
    }
}

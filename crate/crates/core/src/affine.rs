use crate::rational::{serde_rational, serde_rational_vec, to_f64, Rational};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

/// `x ↦ ⟨linear, x⟩ + constant`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AffineFunction {
    #[serde(with = "serde_rational_vec")]
    pub linear: Vec<Rational>,
    #[serde(with = "serde_rational")]
    pub constant: Rational,
}

impl AffineFunction {
    pub fn new(linear: Vec<Rational>, constant: Rational) -> Self {
        Self { linear, constant }
    }

    pub fn from_integers(linear: &[i64], constant: Rational) -> Self {
        Self::new(linear.iter().map(|&a| crate::rational::int(a)).collect(), constant)
    }

    pub fn constant_fn(dim: usize, c: Rational) -> Self {
        Self::new(vec![Rational::zero(); dim], c)
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant_fn(dim, Rational::zero())
    }

    /// The coordinate function `x_k`.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        let mut linear = vec![Rational::zero(); dim];
        linear[k] = Rational::one();
        Self::new(linear, Rational::zero())
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        debug_assert_eq!(x.len(), self.dim());
        self.linear.iter().zip(x).map(|(a, b)| a * b).sum::<Rational>() + &self.constant
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.linear
            .iter()
            .zip(x)
            .map(|(a, b)| to_f64(a) * b)
            .sum::<f64>()
            + to_f64(&self.constant)
    }

    pub fn is_linear_zero(&self) -> bool {
        self.linear.iter().all(Zero::is_zero)
    }

    pub fn is_zero(&self) -> bool {
        self.is_linear_zero() && self.constant.is_zero()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.linear.iter().zip(&other.linear).map(|(a, b)| a + b).collect(),
            &self.constant + &other.constant,
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::new(self.linear.iter().map(|a| a * s).collect(), &self.constant * s)
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    /// Linear part as integers, if every entry is integral.
    pub fn integer_linear(&self) -> Option<Vec<BigInt>> {
        self.linear
            .iter()
            .map(|a| a.is_integer().then(|| a.to_integer()))
            .collect()
    }

    /// Integer entries with gcd 1.
    pub fn has_primitive_normal(&self) -> bool {
        match self.integer_linear() {
            Some(v) => v.iter().fold(BigInt::zero(), |g, a| g.gcd(a)).is_one(),
            None => false,
        }
    }

    /// `L ∘ (y ↦ M y + b)` where `matrix` has one row per coordinate of `x`.
    pub fn pullback(&self, matrix: &[Vec<Rational>], offset: &[Rational]) -> Self {
        let cols = matrix.first().map_or(0, |r| r.len());
        let linear = (0..cols)
            .map(|j| {
                self.linear
                    .iter()
                    .zip(matrix)
                    .map(|(a, row)| a * &row[j])
                    .sum()
            })
            .collect();
        Self::new(linear, self.eval(offset))
    }

    /// Same function viewed in a larger space whose first `dim()` coordinates
    /// are the original ones.
    pub fn extend(&self, new_dim: usize) -> Self {
        let mut linear = self.linear.clone();
        linear.resize(new_dim, Rational::zero());
        Self::new(linear, self.constant.clone())
    }
}

impl fmt::Display for AffineFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (k, a) in self.linear.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            write!(f, "({a})x{}", k + 1)?;
            wrote = true;
        }
        if !self.constant.is_zero() || !wrote {
            if wrote {
                write!(f, " + ")?;
            }
            write!(f, "{}", self.constant)?;
        }
        Ok(())
    }
}

//! Small dense exact linear algebra over the rationals and the integers.

use crate::rational::Rational;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub type Matrix = Vec<Vec<Rational>>;

/// Row-reduces `m` in place and returns the pivot columns.
fn row_reduce(m: &mut Matrix) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for k in c..cols {
            m[r][k] = &m[r][k] * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let factor = m[i][c].clone();
                for k in c..cols {
                    let delta = &factor * &m[r][k];
                    m[i][k] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(rows: &[Vec<Rational>]) -> usize {
    let mut m = rows.to_vec();
    row_reduce(&mut m).len()
}

/// Dimension of the affine hull of `points` (−1 for an empty set).
pub fn affine_dimension(points: &[Vec<Rational>]) -> isize {
    let Some(first) = points.first() else {
        return -1;
    };
    let diffs: Matrix = points[1..]
        .iter()
        .map(|p| p.iter().zip(first).map(|(a, b)| a - b).collect())
        .collect();
    rank(&diffs) as isize
}

pub fn determinant(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= &a[c][c];
        let inv = a[c][c].recip();
        for i in c + 1..n {
            if a[i][c].is_zero() {
                continue;
            }
            let factor = &a[i][c] * &inv;
            for k in c..n {
                let delta = &factor * &a[c][k];
                a[i][k] -= delta;
            }
        }
    }
    det
}

/// Unique solution of the square system `a x = b`, if `a` is invertible.
pub fn solve(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let n = a.len();
    let mut m: Matrix = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = row_reduce(&mut m);
    if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| c != i) {
        return None;
    }
    Some(m.into_iter().map(|r| r[n].clone()).collect())
}

pub fn inverse(m: &[Vec<Rational>]) -> Option<Matrix> {
    let n = m.len();
    let mut aug: Matrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| Rational::from_integer(BigInt::from((i == j) as i32))));
            r
        })
        .collect();
    let pivots = row_reduce(&mut aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_vec(m: &[Vec<Rational>], v: &[Rational]) -> Vec<Rational> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn integer_determinant(m: &[Vec<BigInt>]) -> BigInt {
    let q: Matrix = m
        .iter()
        .map(|r| r.iter().map(|x| Rational::from_integer(x.clone())).collect())
        .collect();
    determinant(&q).to_integer()
}

/// gcd of all maximal minors of a `k × ℓ` integer matrix with `k ≥ ℓ`; it is 1
/// exactly when the rows span the lattice `ℤ^ℓ`.
pub fn maximal_minor_gcd(rows: &[Vec<BigInt>], dim: usize) -> BigInt {
    let mut g = BigInt::zero();
    for subset in combinations(rows.len(), dim) {
        let sub: Vec<Vec<BigInt>> = subset.iter().map(|&i| rows[i].clone()).collect();
        g = g.gcd(&integer_determinant(&sub));
        if g.is_one() {
            break;
        }
    }
    g
}

/// For a primitive integer vector `p`, returns a unimodular integer matrix whose
/// first column `q` has `⟨p, q⟩ = 1` and whose remaining columns span
/// `p^⊥ ∩ ℤ^ℓ`. Columns are returned as vectors.
pub fn unimodular_completion(p: &[BigInt]) -> Option<Vec<Vec<BigInt>>> {
    let n = p.len();
    let mut r = p.to_vec();
    let mut cols: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| BigInt::from((i == j) as i32)).collect())
        .collect();
    loop {
        let nonzero: Vec<usize> = (0..n).filter(|&i| !r[i].is_zero()).collect();
        if nonzero.is_empty() {
            return None;
        }
        if nonzero.len() == 1 {
            let i = nonzero[0];
            if !r[i].abs().is_one() {
                return None;
            }
            cols.swap(0, i);
            r.swap(0, i);
            if r[0].is_negative() {
                for x in cols[0].iter_mut() {
                    *x = -x.clone();
                }
            }
            return Some(cols);
        }
        let i = *nonzero.iter().min_by_key(|&&i| r[i].abs()).unwrap();
        for &j in &nonzero {
            if j == i {
                continue;
            }
            let q = r[j].div_floor(&r[i]);
            let ri = r[i].clone();
            r[j] -= &q * ri;
            let ci = cols[i].clone();
            for (x, y) in cols[j].iter_mut().zip(ci) {
                *x -= &q * y;
            }
        }
    }
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn m(rows: &[&[i64]]) -> Matrix {
        rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect()
    }

    #[test]
    fn determinant_and_solve() {
        let a = m(&[&[2, 1], &[1, 3]]);
        assert_eq!(determinant(&a), int(5));
        let x = solve(&a, &[int(3), int(5)]).unwrap();
        assert_eq!(x, vec![rat(4, 5), rat(7, 5)]);
        assert!(solve(&m(&[&[1, 2], &[2, 4]]), &[int(1), int(2)]).is_none());
        assert_eq!(determinant(&m(&[&[0, 1], &[1, 0]])), int(-1));
    }

    #[test]
    fn rank_and_affine_dimension() {
        assert_eq!(rank(&m(&[&[1, 2], &[2, 4]])), 1);
        let pts = m(&[&[0, 0], &[1, 0], &[0, 1]]);
        assert_eq!(affine_dimension(&pts), 2);
        assert_eq!(affine_dimension(&m(&[&[0, 0], &[1, 1], &[2, 2]])), 1);
        assert_eq!(affine_dimension(&[]), -1);
    }

    #[test]
    fn combinations_enumerate_all_subsets() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(combinations(3, 1), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn unimodular_completion_of_primitive_vectors() {
        for p in [vec![-1i64, -1, -1], vec![3, 5], vec![0, 1], vec![-2, -1], vec![6, 10, 15]] {
            let pb: Vec<BigInt> = p.iter().map(|&x| BigInt::from(x)).collect();
            let cols = unimodular_completion(&pb).unwrap();
            let dot = |c: &Vec<BigInt>| -> BigInt { c.iter().zip(&pb).map(|(a, b)| a * b).sum() };
            assert_eq!(dot(&cols[0]), BigInt::one());
            for c in &cols[1..] {
                assert!(dot(c).is_zero());
            }
            assert!(integer_determinant(&cols).abs().is_one());
        }
        assert!(unimodular_completion(&[BigInt::from(2), BigInt::from(4)]).is_none());
    }

    #[test]
    fn minor_gcd_detects_sublattices() {
        let rows = |r: &[&[i64]]| -> Vec<Vec<BigInt>> {
            r.iter().map(|v| v.iter().map(|&x| BigInt::from(x)).collect()).collect()
        };
        assert_eq!(maximal_minor_gcd(&rows(&[&[0, -1], &[-2, -1]]), 2), BigInt::from(2));
        assert_eq!(maximal_minor_gcd(&rows(&[&[1, 0], &[0, 1], &[-1, -1]]), 2), BigInt::one());
    }
}

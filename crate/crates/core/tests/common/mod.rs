#![allow(dead_code, clippy::needless_range_loop)]

use polystab::affine::AffineFunction;
use polystab::pl::{make_pl, PLConvexFunction};
use polystab::poly::Polynomial;
use polystab::polytope::LabeledPolytope;
use polystab::rational::{rat, Rational};
use proptest::prelude::*;

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub fn rational(span: i64) -> impl Strategy<Value = Rational> {
    (-span..=span, 1i64..=4).prop_map(|(n, d)| rat(n, d))
}

pub fn affine(dim: usize, span: i64) -> impl Strategy<Value = AffineFunction> {
    (prop::collection::vec(rational(span), dim), rational(span)).prop_map(|(l, c)| AffineFunction::new(l, c))
}

pub fn integer_affine(dim: usize, slope: i64, span: i64) -> impl Strategy<Value = AffineFunction> {
    (prop::collection::vec(-slope..=slope, dim), rational(span))
        .prop_map(|(l, c)| AffineFunction::new(l.into_iter().map(|a| rat(a, 1)).collect(), c))
}

pub fn exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u32>| {
                let used: u32 = e.iter().sum();
                (0..=degree - used).map(move |k| {
                    let mut next = e.clone();
                    next.push(k);
                    next
                })
            })
            .collect();
    }
    out
}

pub fn polynomial(dim: usize, degree: u32) -> impl Strategy<Value = Polynomial> {
    let exps = exponents(dim, degree);
    prop::collection::vec(rational(4), exps.len())
        .prop_map(move |cs| Polynomial::from_terms(dim, exps.clone().into_iter().zip(cs)))
}

/// `1 + q` with `q ≥ 0` coefficientwise, so positive on the nonnegative orthant.
pub fn density(dim: usize) -> impl Strategy<Value = Polynomial> {
    let exps = exponents(dim, 2);
    prop::collection::vec((0i64..=3, 1i64..=3), exps.len()).prop_map(move |cs| {
        let q = Polynomial::from_terms(dim, exps.clone().into_iter().zip(cs.into_iter().map(|(n, d)| rat(n, d))));
        &Polynomial::one(dim) + &q
    })
}

pub fn pl_on(p: LabeledPolytope, pieces: impl Strategy<Value = Vec<AffineFunction>>) -> impl Strategy<Value = PLConvexFunction> {
    pieces.prop_map(move |ps| make_pl(&p, ps).unwrap())
}

pub fn pl(p: &LabeledPolytope, max_pieces: usize) -> impl Strategy<Value = PLConvexFunction> {
    pl_on(p.clone(), prop::collection::vec(affine(p.dim(), 3), 1..=max_pieces))
}

/// Product of elementary integer row operations and a coordinate swap.
pub fn unimodular(dim: usize) -> impl Strategy<Value = Vec<Vec<Rational>>> {
    (prop::collection::vec((0..dim, 0..dim, -2i64..=2), 0..6), any::<bool>()).prop_map(move |(ops, swap)| {
        let mut m: Vec<Vec<i64>> = (0..dim).map(|i| (0..dim).map(|j| (i == j) as i64).collect()).collect();
        for (i, j, c) in ops.into_iter().filter(|(i, j, _)| i != j) {
            for k in 0..dim {
                m[i][k] += c * m[j][k];
            }
        }
        if swap && dim > 1 {
            m.swap(0, 1);
        }
        m.into_iter().map(|r| r.into_iter().map(|a| rat(a, 1)).collect()).collect()
    })
}

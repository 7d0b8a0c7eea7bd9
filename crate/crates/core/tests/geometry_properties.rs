mod common;

use common::*;
use num_traits::{One, Zero};
use polystab::affine::AffineFunction;
use polystab::integrate::{integrate_boundary, integrate_cell, integrate_polynomial};
use polystab::linalg::{combinations, inverse, mat_vec, solve};
use polystab::pl::{donaldson_polytope, PLConvexFunction};
use polystab::polytope::{split_cell, triangulate_with_creases, LabeledPolytope, Point};
use polystab::rational::{int, rat, to_f64, Rational};
use proptest::prelude::*;

fn base_polytopes() -> Vec<LabeledPolytope> {
    let interval = LabeledPolytope::standard_simplex(1);
    let hinge = PLConvexFunction::from_pieces(vec![AffineFunction::zero(1), AffineFunction::from_integers(&[2], int(-1))]).unwrap();
    let kink = PLConvexFunction::from_pieces(vec![AffineFunction::zero(1), AffineFunction::new(vec![int(1)], rat(-1, 2))]).unwrap();
    vec![
        LabeledPolytope::standard_simplex(2),
        LabeledPolytope::unit_cube(2),
        LabeledPolytope::standard_simplex(3),
        donaldson_polytope(&interval, &hinge, None).unwrap().polytope,
        donaldson_polytope(&interval, &kink, Some(int(1))).unwrap().polytope,
    ]
}

/// Shoelace area of a convex polygon, vertices ordered by angle.
fn shoelace(vertices: &[Point]) -> Rational {
    let cx: f64 = vertices.iter().map(|v| to_f64(&v[0])).sum::<f64>() / vertices.len() as f64;
    let cy: f64 = vertices.iter().map(|v| to_f64(&v[1])).sum::<f64>() / vertices.len() as f64;
    let mut vs = vertices.to_vec();
    vs.sort_by(|a, b| {
        let ta = (to_f64(&a[1]) - cy).atan2(to_f64(&a[0]) - cx);
        let tb = (to_f64(&b[1]) - cy).atan2(to_f64(&b[0]) - cx);
        ta.total_cmp(&tb)
    });
    let n = vs.len();
    (0..n).map(|i| &vs[i][0] * &vs[(i + 1) % n][1] - &vs[(i + 1) % n][0] * &vs[i][1]).sum::<Rational>() / int(2)
}

fn brute_force_vertices(labels: &[AffineFunction]) -> Vec<Point> {
    let n = labels[0].dim();
    let mut out: Vec<Point> = combinations(labels.len(), n)
        .into_iter()
        .filter_map(|idx| {
            let a: Vec<Vec<Rational>> = idx.iter().map(|&i| labels[i].linear.clone()).collect();
            let b: Vec<Rational> = idx.iter().map(|&i| -&labels[i].constant).collect();
            solve(&a, &b)
        })
        .filter(|x| labels.iter().all(|l| l.eval(x) >= Rational::zero()))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// The square `[0, 3]²` cut by up to three lattice half-planes through its
/// interior.
fn polygon() -> impl Strategy<Value = LabeledPolytope> {
    prop::collection::vec((prop::sample::select(vec![(1i64, 1i64), (1, -1), (1, 2), (2, 1), (-1, 2), (-1, -1)]), 1i64..=5), 0..=3)
        .prop_map(|cuts| {
            let mut labels = LabeledPolytope::unit_cube(2).labels().to_vec();
            for l in &mut labels {
                if !l.constant.is_zero() {
                    l.constant = int(3);
                }
            }
            for ((a, b), c) in cuts {
                let shift = if a + b < 0 { 3 * (a + b).abs() } else { 0 };
                labels.push(AffineFunction::new(vec![int(-a), int(-b)], int(c + shift)));
            }
            labels
        })
        .prop_filter_map("nonempty interior", |labels| LabeledPolytope::new(labels).ok())
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn triangulated_volume_matches_shoelace(p in polygon()) {
        prop_assert_eq!(p.volume(), shoelace(p.vertices()));
        prop_assert_eq!(p.vertices(), &brute_force_vertices(p.labels())[..]);
    }

    #[test]
    fn delzant_verdict_is_lattice_invariant(
        (k, m, shift) in (0usize..5).prop_flat_map(|k| {
            let n = base_polytopes()[k].dim();
            (Just(k), unimodular(n), prop::collection::vec(-3i64..=3, n))
        }),
    ) {
        let p = &base_polytopes()[k];
        let b: Vec<Rational> = shift.iter().map(|&s| int(s)).collect();
        let q = p.transform(&m, &b).unwrap();
        let (before, after) = (p.delzant(), q.delzant());
        prop_assert_eq!(before.simple, after.simple);
        prop_assert_eq!(before.integral, after.integral);
        prop_assert_eq!(before.failing_vertices.len(), after.failing_vertices.len());
        prop_assert_eq!(p.volume(), q.volume());
    }

    #[test]
    fn boundary_integrals_are_lattice_invariant(
        (k, m, g) in (0usize..5).prop_flat_map(|k| {
            let n = base_polytopes()[k].dim();
            (Just(k), unimodular(n), polynomial(n, 2))
        }),
    ) {
        let p = &base_polytopes()[k];
        let n = p.dim();
        let inv = inverse(&m).unwrap();
        let b = vec![Rational::one(); n];
        let q = p.transform(&m, &b).unwrap();
        let offset: Vec<Rational> = mat_vec(&inv, &b).into_iter().map(|x| -x).collect();
        let images: Vec<AffineFunction> = (0..n).map(|i| AffineFunction::new(inv[i].clone(), offset[i].clone())).collect();
        let g_q = g.substitute_affine(&images);
        prop_assert_eq!(integrate_boundary(p, &g).unwrap().total, integrate_boundary(&q, &g_q).unwrap().total);
        prop_assert_eq!(integrate_polynomial(p, &g).unwrap(), integrate_polynomial(&q, &g_q).unwrap());
    }

    #[test]
    fn integrals_are_additive_over_splits(
        (k, cuts, g) in (0usize..5).prop_flat_map(|k| {
            let n = base_polytopes()[k].dim();
            (Just(k), prop::collection::vec(affine(n, 3), 1..=3), polynomial(n, 3))
        }),
    ) {
        let p = &base_polytopes()[k];
        let cuts: Vec<AffineFunction> = cuts.into_iter().filter(|h| !h.is_linear_zero()).collect();
        let whole = integrate_polynomial(p, &g).unwrap();
        let pieces: Rational = split_cell(p.cell(), &cuts).unwrap().iter().map(|c| integrate_cell(c, &g)).sum();
        prop_assert_eq!(&pieces, &whole);
        let sub = triangulate_with_creases(p, &cuts).unwrap();
        prop_assert_eq!(sub.volume(), p.volume());
    }

    #[test]
    fn donaldson_vertices_lie_over_vertices_or_creases(
        f in pl_on(LabeledPolytope::standard_simplex(2), prop::collection::vec(integer_affine(2, 2, 2), 1..=3)),
        extra in 0i64..=2,
    ) {
        let base = LabeledPolytope::standard_simplex(2);
        let r = polystab::pl::default_height(&base, &f) + int(extra);
        let tc = donaldson_polytope(&base, &f, Some(r.clone())).unwrap();
        prop_assert_eq!(tc.polytope.vertices(), &brute_force_vertices(tc.polytope.labels())[..]);
        for v in tc.polytope.vertices() {
            let (x, y) = (&v[..2], &v[2]);
            let top = &r - f.eval(x);
            let over_vertex = base.vertices().iter().any(|b| b[..] == *x);
            let over_crease = f.active_at(x).len() >= 2;
            prop_assert!((over_vertex && (y.is_zero() || *y == top)) || (over_crease && *y == top), "{:?}", v);
        }
        prop_assert!(!tc.classification.is_dpl_dom() || tc.classification.is_dpl());
        prop_assert_eq!(tc.classification.is_dpl(), tc.verdict.is_delzant());
    }
}

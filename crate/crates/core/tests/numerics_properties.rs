mod common;

use common::*;
use num_traits::{One, Signed, Zero};
use polystab::affine::AffineFunction;
use polystab::fibration::bundle_problem;
use polystab::functionals::futaki;
use polystab::mabuchi::{entropy_term, linear_term, SymplecticPotential};
use polystab::pl::PLConvexFunction;
use polystab::poly::Polynomial;
use polystab::polytope::LabeledPolytope;
use polystab::rational::{int, rat, to_f64, Rational};
use polystab::search::{estimate_lambda, linear_forms, stability_search, ConvexGrid, Norm, Verdict};
use polystab::weights::{solve_extremal, BundleSpec, WeightExpr};
use proptest::prelude::*;

fn extremal_weight(p: &LabeledPolytope, v: &Polynomial) -> WeightExpr {
    let l = solve_extremal(p, v, v, &Polynomial::zero(p.dim())).unwrap();
    WeightExpr::polynomial(Polynomial::from_affine(&l))
}

/// `a x² + b x³` with `a ∈ [0, 1/2]`, `|b| ≤ 1/8`: convex on `[0, 1]` once
/// added to the reference potential.
fn interval_perturbation() -> impl Strategy<Value = Polynomial> {
    (0i64..=4, -1i64..=1).prop_map(|(a, b)| Polynomial::from_terms(1, [(vec![2], rat(a, 8)), (vec![3], rat(b, 8))]))
}

fn norm() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1Star), Just(Norm::J)]
}

fn both_sides(c: (i64, i64)) -> BundleSpec {
    BundleSpec::new(0, &[(1, 0), (1, 1)], int(1) + rat(c.0, c.1))
}

/// Node of the interval grid at `1 − x`.
fn reflected_node(grid: &ConvexGrid, i: usize) -> usize {
    let k = grid.resolution - grid.lattice[i][0];
    grid.lattice.iter().position(|l| l[0] == k).unwrap()
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn entropy_and_linear_term_ignore_affine_shifts(phi in interval_perturbation(), v in density(1), xi in affine(1, 4)) {
        let p = LabeledPolytope::standard_simplex(1);
        let u = SymplecticPotential::new(&p, phi.clone()).unwrap();
        let shifted = SymplecticPotential::new(&p, &phi + &Polynomial::from_affine(&xi)).unwrap();
        prop_assert!(u.check_convex(64, 0).is_ok());
        prop_assert_eq!(entropy_term(&u, &v, 1e-8).unwrap().value, entropy_term(&shifted, &v, 1e-8).unwrap().value);
        let w = extremal_weight(&p, &v);
        prop_assert_eq!(linear_term(&u, &v, &w).unwrap(), linear_term(&shifted, &v, &w).unwrap());
        let four = WeightExpr::constant(1, int(4));
        let one = Polynomial::one(1);
        prop_assert_eq!(linear_term(&u, &one, &four).unwrap(), linear_term(&shifted, &one, &four).unwrap());
    }

    #[test]
    fn linear_term_ignores_affine_shifts_on_the_triangle(phi in polynomial(2, 3), v in density(2), xi in affine(2, 4)) {
        let p = LabeledPolytope::standard_simplex(2);
        let w = extremal_weight(&p, &v);
        let u = SymplecticPotential::new(&p, phi.clone()).unwrap();
        let shifted = SymplecticPotential::new(&p, &phi + &Polynomial::from_affine(&xi)).unwrap();
        prop_assert_eq!(linear_term(&u, &v, &w).unwrap(), linear_term(&shifted, &v, &w).unwrap());
    }

    #[test]
    fn entropy_vanishes_without_curvature(v in density(1), xi in affine(1, 4)) {
        let p = LabeledPolytope::standard_simplex(1);
        let u = SymplecticPotential::new(&p, Polynomial::from_affine(&xi)).unwrap();
        let r = entropy_term(&u, &v, 1e-8).unwrap();
        prop_assert_eq!(r.value, 0.0);
        prop_assert!(r.converged);
    }

    #[test]
    fn reference_profile_is_constant_near_facets(
        (n, facet, weights) in (1usize..=3).prop_flat_map(|n| (Just(n), 0..=n, prop::collection::vec(1u32..=20, n))),
    ) {
        let p = LabeledPolytope::standard_simplex(n);
        let u = SymplecticPotential::guillemin(&p);
        let on_facet: Vec<Vec<f64>> = p
            .vertices()
            .iter()
            .filter(|x| p.labels()[facet].eval(x).is_zero())
            .map(|x| x.iter().map(to_f64).collect())
            .collect();
        let total: f64 = weights.iter().map(|&w| w as f64).sum();
        let base: Vec<f64> = (0..n)
            .map(|j| on_facet.iter().zip(&weights).map(|(x, &w)| x[j] * w as f64).sum::<f64>() / total)
            .collect();
        let expected = 0.5f64.powi(n as i32);
        for value in u.boundary_profile(facet, &base, &[1, 2, 4, 6, 8]) {
            prop_assert!((value - expected).abs() <= 1e-9 * expected, "{} vs {}", value, expected);
        }
    }

    #[test]
    fn refinement_never_raises_the_estimate(v in density(1), norm in norm()) {
        let p = LabeledPolytope::standard_simplex(1);
        let report = stability_search(&p, &v, &extremal_weight(&p, &v), &[2, 4, 8], norm).unwrap();
        prop_assert!(report.non_increasing(), "{:?}", report.lambdas());
        prop_assert!(report.lambdas().iter().all(|l| l.is_positive()));
    }

    #[test]
    fn refinement_on_hirzebruch_bases(c in (1i64..=40, 1i64..=5), norm in norm()) {
        let problem = bundle_problem(&both_sides(c)).unwrap();
        let report = stability_search(problem.delta(), problem.density(), problem.w_bar(), &[2, 4, 8], norm).unwrap();
        prop_assert!(report.non_increasing(), "{:?}", report.lambdas());
        prop_assert_eq!(report.verdict, Verdict::NoDestabilizerFound);
    }

    #[test]
    fn scaling_the_density_rescales_the_minimizer(v in density(1), w in polynomial(1, 1), c in (1i64..=9, 1i64..=4), norm in norm()) {
        let p = LabeledPolytope::standard_simplex(1);
        let c = rat(c.0, c.1);
        let w = WeightExpr::polynomial(w);
        let a = estimate_lambda(&p, &v, &w, 4, norm).unwrap();
        let b = estimate_lambda(&p, &v.scale(&c), &w, 4, norm).unwrap();
        prop_assert_eq!(&a.lambda, &b.lambda);
        let rescaled: Vec<Rational> = b.values.iter().map(|x| x * &c).collect();
        prop_assert_eq!(rescaled, a.values);
    }

    #[test]
    fn certificates_accompany_nonpositive_estimates(v in density(1), g in affine(1, 4), delta in (1i64..=8, 1i64..=4), norm in norm()) {
        let p = LabeledPolytope::standard_simplex(1);
        let WeightExpr { poly, .. } = extremal_weight(&p, &v);
        let w = WeightExpr::polynomial(&poly + &Polynomial::from_affine(&g.scale(&rat(delta.0, delta.1))));
        let report = stability_search(&p, &v, &w, &[4], norm).unwrap();
        let lambda = report.lambdas()[0].clone();
        prop_assert_eq!(report.destabilizer.is_some(), !lambda.is_positive());
        if let Some(cert) = report.destabilizer {
            prop_assert!(cert.verified);
            let recomputed = futaki(&p, &v, &w, &cert.function).unwrap();
            prop_assert_eq!(&recomputed, &cert.futaki);
            prop_assert!(!recomputed.is_positive());
            prop_assert!(cert.norm.is_positive());
        }
    }

    #[test]
    fn swapping_blocks_reflects_the_minimizer(blocks in prop::collection::vec((1u32..=3, -3i64..=3), 2), c in (1i64..=12, 1i64..=4), norm in norm()) {
        let max_slope = blocks.iter().map(|&(r, d)| rat(d, r as i64)).max().unwrap();
        let spec = BundleSpec::new(0, &blocks, &max_slope + rat(c.0, c.1));
        let swapped = BundleSpec::new(0, &[blocks[1], blocks[0]], spec.c.clone());
        let (a, b) = (bundle_problem(&spec).unwrap(), bundle_problem(&swapped).unwrap());
        let grid = ConvexGrid::new(a.delta(), 4).unwrap();
        let ea = polystab::search::estimate_on_grid(&grid, a.density(), a.w_bar(), norm).unwrap();
        let eb = polystab::search::estimate_on_grid(&grid, b.density(), b.w_bar(), norm).unwrap();
        prop_assert_eq!(&ea.lambda, &eb.lambda);
        let reflected: Vec<Rational> = (0..grid.num_nodes()).map(|i| ea.values[reflected_node(&grid, i)].clone()).collect();
        let forms = linear_forms(&grid, b.density(), b.w_bar()).unwrap();
        let dot = |form: &[Rational]| form.iter().zip(&reflected).map(|(x, y)| x * y).sum::<Rational>();
        prop_assert!(grid.is_convex(&reflected));
        prop_assert!(reflected[grid.base_node()].is_zero());
        prop_assert_eq!(dot(&forms.futaki), eb.lambda);
        let size = match norm {
            Norm::L1Star => dot(&forms.l1),
            Norm::J => dot(&forms.j),
        };
        prop_assert_eq!(size, Rational::one());
    }

    #[test]
    fn documents_round_trip_through_json(q in polynomial(2, 3), f in pl(&LabeledPolytope::standard_simplex(2), 4), cuts in 0usize..3) {
        let text = serde_json::to_string(&q).unwrap();
        prop_assert_eq!(serde_json::from_str::<Polynomial>(&text).unwrap(), q);
        let text = serde_json::to_string(&f).unwrap();
        prop_assert_eq!(serde_json::from_str::<PLConvexFunction>(&text).unwrap(), f);
        let mut labels = LabeledPolytope::unit_cube(2).labels().to_vec();
        let corners = [AffineFunction::new(vec![int(-1), int(-1)], rat(3, 2)), AffineFunction::new(vec![int(1), int(1)], rat(-1, 2))];
        labels.extend(corners.into_iter().take(cuts));
        let p = LabeledPolytope::new(labels).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<LabeledPolytope>(&text).unwrap(), p);
        let spec = both_sides((3, 2));
        let text = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(serde_json::from_str::<BundleSpec>(&text).unwrap(), spec);
    }
}

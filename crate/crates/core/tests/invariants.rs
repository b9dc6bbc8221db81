use ballvn::calculus::{eval_series_tuple, DEFAULT_MAX_ORDER};
use ballvn::experiments::{kernel_tuple, random_polynomial};
use ballvn::gleason::{gleason_reconstruct, gleason_split_poly};
use ballvn::linalg::{self, c64, C64};
use ballvn::par::rng_from_seed;
use ballvn::pick::{
    kernel_matrix, pick_certificate, restriction_multiplier_norm, restriction_norm_bisection, KernelSpec,
    PointConfiguration, PsdTest,
};
use ballvn::schur::{schur_construct, SchurConfig};
use ballvn::tuple::{
    eval_poly_tuple, random_ball_point, random_commuting_tuple, simultaneous_triangularize, TupleKind,
};
use ballvn::{BallAutomorphism, FunctionExpr, MatrixTuple};
use proptest::prelude::*;
use rand::Rng;

fn kind(i: u8) -> TupleKind {
    [TupleKind::DiagonalConjugated, TupleKind::PolynomialInOne, TupleKind::NilpotentUpper][usize::from(i % 3)]
}

fn spec(a_index: u8) -> KernelSpec {
    KernelSpec::new([0.5, 1.0, 2.0][usize::from(a_index % 3)]).unwrap()
}

fn gap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn involution_swaps_base_and_origin(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let b = random_ball_point(&mut rng, d, 0.95);
        let z = random_ball_point(&mut rng, d, 0.99);
        let phi = BallAutomorphism::involution_at(&b).unwrap();
        prop_assert!(phi.apply_point(&b).unwrap().iter().all(|w| w.norm() < 1e-12));
        prop_assert!(gap(&phi.apply_point(&vec![c64(0.0, 0.0); d]).unwrap(), &b) < 1e-12);
        let w = phi.apply_point(&z).unwrap();
        prop_assert!(w.iter().map(|x| x.norm_sqr()).sum::<f64>() < 1.0);
        prop_assert!(gap(&phi.apply_point(&w).unwrap(), &z) < 1e-9);
    }

    #[test]
    fn restriction_norm_dominates_values_and_grows_with_the_set(seed in any::<u64>(), d in 1usize..4, a in 0u8..3) {
        let spec = spec(a);
        let mut rng = rng_from_seed(seed);
        let p = random_polynomial(&mut rng, d, 0..=3);
        let pts: Vec<Vec<C64>> = (0..4).map(|_| random_ball_point(&mut rng, d, 0.9)).collect();
        let (small, kept_small) = PointConfiguration::merged(&pts[..3]).unwrap();
        let (large, kept_large) = PointConfiguration::merged(&pts).unwrap();
        let vs: Vec<C64> = kept_small.iter().map(|&k| p.eval(&pts[k])).collect();
        let vl: Vec<C64> = kept_large.iter().map(|&k| p.eval(&pts[k])).collect();
        let ns = restriction_multiplier_norm(&vs, &small, spec).unwrap().value;
        let nl = restriction_multiplier_norm(&vl, &large, spec).unwrap().value;
        let max_value = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(ns >= max_value * (1.0 - 1e-9));
        prop_assert!(nl >= ns * (1.0 - 1e-9));
    }

    #[test]
    fn closed_form_and_bisection_agree_and_pick_is_tight(seed in any::<u64>(), d in 1usize..4, a in 0u8..3) {
        let spec = spec(a);
        let mut rng = rng_from_seed(seed);
        let p = random_polynomial(&mut rng, d, 0..=3);
        let pts: Vec<Vec<C64>> = (0..3).map(|_| random_ball_point(&mut rng, d, 0.8)).collect();
        let (f, kept) = PointConfiguration::merged(&pts).unwrap();
        let values: Vec<C64> = kept.iter().map(|&k| p.eval(&pts[k])).collect();
        let norm = restriction_multiplier_norm(&values, &f, spec).unwrap();
        prop_assume!(!kernel_matrix(&f, spec).ill_conditioned);
        let chol = restriction_norm_bisection(&values, &f, spec, PsdTest::Cholesky).unwrap();
        prop_assert!((norm.value - chol).abs() <= 1e-7 * (1.0 + norm.value));
        let at = pick_certificate(&values, &f, spec, norm.value * (1.0 + 1e-9)).unwrap();
        prop_assert!(at.feasible);
        if norm.value > 1e-6 {
            let below = pick_certificate(&values, &f, spec, norm.value * (1.0 - 1e-4)).unwrap();
            prop_assert!(!below.feasible);
        }
    }

    #[test]
    fn polynomial_split_is_exact(seed in any::<u64>(), d in 1usize..6, degree in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let p = random_polynomial(&mut rng, d, 1..=degree);
        let parts = gleason_split_poly(&p).unwrap();
        prop_assert_eq!(gleason_reconstruct(&parts).unwrap(), p);
    }

    #[test]
    fn series_of_polynomial_is_direct_evaluation(seed in any::<u64>(), n in 1usize..5, d in 1usize..4, k in 0u8..3) {
        let mut rng = rng_from_seed(seed);
        let t = random_commuting_tuple(n, d, rng.random(), kind(k));
        let p = random_polynomial(&mut rng, d, 0..=4);
        let direct = eval_poly_tuple(&p, &t).unwrap();
        let series = eval_series_tuple(&p, &t, 1e-14, DEFAULT_MAX_ORDER).unwrap();
        prop_assert!(linalg::frobenius(&(series.value - &direct)) <= 1e-10 * (1.0 + linalg::frobenius(&direct)));
    }

    #[test]
    fn triangularization_is_a_unitary_similarity(seed in any::<u64>(), n in 1usize..5, d in 1usize..4, k in 0u8..3) {
        let t = random_commuting_tuple(n, d, seed, kind(k));
        let r = simultaneous_triangularize(&t).unwrap();
        for (orig, tri) in t.entries().iter().zip(r.triangular_tuple.entries()) {
            prop_assert!(linalg::strict_lower_norm(tri) <= 1e-9);
            let back = r.unitary.adjoint() * tri * &r.unitary;
            prop_assert!(linalg::frobenius(&(back - orig)) <= 1e-9);
        }
    }

    #[test]
    fn kernel_tuple_norm_is_restriction_norm(seed in any::<u64>(), d in 1usize..3, a in 0u8..3) {
        let spec = spec(a);
        let mut rng = rng_from_seed(seed);
        let pts: Vec<Vec<C64>> = (0..3).map(|_| random_ball_point(&mut rng, d, 0.8)).collect();
        let (f, kept) = PointConfiguration::merged(&pts).unwrap();
        let t = match kernel_tuple(&f, spec) {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        let p = random_polynomial(&mut rng, d, 0..=3);
        let values: Vec<C64> = kept.iter().map(|&k| p.eval(&pts[k])).collect();
        let norm = restriction_multiplier_norm(&values, &f, spec).unwrap().value;
        let op = linalg::op_norm(&eval_poly_tuple(&p, &t).unwrap());
        prop_assert!((op - norm).abs() <= 1e-7 * (1.0 + norm));
    }

    #[test]
    fn point_configuration_json_round_trip(seed in any::<u64>(), d in 1usize..4, n in 1usize..5) {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<Vec<C64>> = (0..n).map(|_| random_ball_point(&mut rng, d, 0.99)).collect();
        let f = PointConfiguration::new(pts).unwrap();
        let back: PointConfiguration = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn schur_interpolates_on_diagonal_tuples(seed in any::<u64>(), n in 1usize..4, d in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<Vec<C64>> = (0..n).map(|_| random_ball_point(&mut rng, d, 0.8)).collect();
        prop_assume!(PointConfiguration::new(pts.clone()).is_ok());
        let t = MatrixTuple::diagonal(&pts).unwrap();
        let p = random_polynomial(&mut rng, d, 0..=3);
        let cfg = SchurConfig { seed, sup_norm_budget: 500, ..SchurConfig::default() };
        let r = schur_construct(&FunctionExpr::poly(p.clone()), &t, &cfg).unwrap();
        prop_assert!(r.accepts(1e-6));
        for z in &pts {
            let g = ballvn::expr::eval_expr_point(&r.g, z).unwrap();
            prop_assert!((g - p.eval(z)).norm() <= 1e-6 * (1.0 + p.eval(z).norm()));
        }
    }
}

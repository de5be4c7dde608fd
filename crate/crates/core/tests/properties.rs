//! Randomized invariants of the estimator and the stability analysis.

mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use pbdw::analysis::{inf_sup_beta, lambda_nl, real_q, AlgorithmMatrix, LambdaUMethod};
use pbdw::background::BoxConstraints;
use pbdw::estimator::{PbdwOperator, Xi};
use pbdw::qp::{solve_box_qp, QpOptions};

fn xi_strategy() -> impl Strategy<Value = Xi> {
    prop_oneof![
        Just(Xi::ZERO),
        Just(Xi::Infinite),
        (-4.0f64..3.0).prop_map(|e| Xi::Finite(10f64.powf(e))),
    ]
}

fn op(inst: &Instance<f64>, xi: Xi, bounds: Option<BoxConstraints>) -> PbdwOperator<f64> {
    PbdwOperator::assemble(inst.l.clone(), inst.k.clone(), xi, bounds)
        .unwrap()
        .with_vectors(inst.z().clone(), inst.q().clone())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weight_spectrum_is_shifted_inverse(seed in 0u64..10_000, m in 1usize..10, e in -3.0f64..3.0) {
        let inst = real_instance(seed, 24, 1, m.max(1));
        let xi = 10f64.powf(e);
        let o = op(&inst, Xi::Finite(xi), None);
        let mut got: Vec<f64> = o.weight().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut want: Vec<f64> = inst.k.clone().symmetric_eigen().eigenvalues.iter().map(|l| 1.0 / (xi + l)).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-10 * w);
        }
    }

    #[test]
    fn update_is_orthogonal_to_background(seed in 0u64..10_000, n in 1usize..5, extra in 0usize..6, xi in xi_strategy()) {
        let inst = real_instance(seed, 24, n, n + extra);
        let y = random_vector::<f64>(&mut rng(seed ^ 1), n + extra);
        let est = op(&inst, xi, None).solve(&y).unwrap();
        let update = inst.q() * &est.eta;
        let inner = inst.z().transpose() * (inst.space.gram() * &update);
        let scale = g_norm(&inst.space, &update).max(1e-300);
        prop_assert!(inner.amax() <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn state_matches_coefficients(seed in 0u64..10_000, n in 1usize..5, extra in 0usize..6, xi in xi_strategy()) {
        let inst = real_instance(seed, 24, n, n + extra);
        let y = random_vector::<f64>(&mut rng(seed ^ 2), n + extra);
        let est = op(&inst, xi, None).solve(&y).unwrap();
        let rebuilt = inst.z() * &est.z + inst.q() * &est.eta;
        prop_assert!(rel_diff(est.state.as_ref().unwrap(), &rebuilt) <= 1e-12);
    }

    #[test]
    fn solver_beats_random_competitors(seed in 0u64..10_000, n in 1usize..5, extra in 1usize..6, e in -3.0f64..2.0) {
        let m = n + extra;
        let inst = real_instance(seed, 24, n, m);
        let o = op(&inst, Xi::Finite(10f64.powf(e)), None);
        let mut r = rng(seed ^ 3);
        let y = random_vector::<f64>(&mut r, m);
        let est = o.solve(&y).unwrap();
        for _ in 0..10 {
            let z = &est.z + random_vector::<f64>(&mut r, n) * 0.1;
            let eta = &est.eta + random_vector::<f64>(&mut r, m) * 0.1;
            prop_assert!(o.objective(&z, &eta, &y).unwrap() >= est.objective - 1e-12 * est.objective.abs().max(1.0));
        }
    }

    #[test]
    fn box_qp_matches_enumeration(seed in 0u64..10_000, n in 1usize..5, extra in 0usize..5) {
        let inst = real_instance(seed, 20, n, n + extra);
        let mut r = rng(seed ^ 4);
        let y = random_vector::<f64>(&mut r, n + extra);
        let o = op(&inst, Xi::Finite(0.1), None);
        let q = real_q(&o);
        let f = inst.l.transpose() * o.weight() * &y;
        let bx = random_box(&mut r, n, 1.0, 0.2);
        let sol = solve_box_qp(&q, &f, &bx, QpOptions::default()).unwrap();
        let oracle = enumerate_box_qp(&q, &f, &bx);
        prop_assert!((&sol.z - &oracle).norm() <= 1e-6 * (1.0 + oracle.norm()));
    }

    #[test]
    fn lambda_nl_shrinks_with_the_box(seed in 0u64..10_000, n in 1usize..6) {
        let inst = real_instance(seed, 20, n, n + 2);
        let q = real_q(&op(&inst, Xi::Finite(1.0), None));
        let mut r = rng(seed ^ 5);
        let outer = random_box(&mut r, n, 1.0, 0.0);
        // Freeze a random subset of the outer box's coordinates.
        let mut inner = outer.clone();
        for i in 0..n {
            if r.random_bool(0.5) {
                inner.upper[i] = inner.lower[i];
            }
        }
        let full = lambda_nl(&q, None).unwrap();
        prop_assert!(lambda_nl(&q, Some(&inner)).unwrap() <= lambda_nl(&q, Some(&outer)).unwrap() * (1.0 + 1e-12));
        prop_assert!((lambda_nl(&q, Some(&outer)).unwrap() - full).abs() <= 1e-12 * full);
    }

    #[test]
    fn beta_is_a_cosine_and_lambda2_matches_power_iteration(seed in 0u64..10_000, n in 1usize..4, extra in 0usize..6, xi in xi_strategy()) {
        let inst = real_instance(seed, 24, n, n + extra);
        let beta = inf_sup_beta(&inst.l, &inst.k).unwrap();
        prop_assert!(beta > 0.0 && beta <= 1.0 + 1e-12);
        let o = op(&inst, xi, None);
        let am = AlgorithmMatrix::from_operator(&inst.space, &inst.obs, &o).unwrap();
        let l2 = am.lambda_2();
        prop_assert!((l2 - am.lambda_2_full(&inst.space)).abs() <= 1e-8 * l2);
        prop_assert!((l2 - power_smax(am.reduced(), 2000)).abs() <= 1e-6 * l2);
        let bias = am.lambda_bias();
        let lu = am.lambda_u(&inst.space, LambdaUMethod::Subspace).unwrap();
        prop_assert!(bias <= lu + 1.0 + 1e-12);
        if !xi.is_finite() || xi == Xi::ZERO {
            prop_assert!(bias <= 1e-8);
            prop_assert!(am.idempotence_defect() <= 1e-8);
        }
    }
}

#[test]
fn image_dimension_by_regime() {
    let inst = real_instance(3, 24, 3, 7);
    for (xi, dim) in [(Xi::Infinite, 3), (Xi::ZERO, 7), (Xi::Finite(0.3), 7)] {
        let am = AlgorithmMatrix::from_operator(&inst.space, &inst.obs, &op(&inst, xi, None)).unwrap();
        assert_eq!(am.image_dim(), dim, "xi = {xi}");
        assert!(am.image_residual(&inst.space) < 1e-10);
    }
}

#[test]
fn complex_path_reproduces_real_inputs() {
    let inst = real_instance(11, 24, 3, 6);
    let embed = |m: &DMatrix<f64>| m.map(|v| num_complex::Complex64::new(v, 0.0));
    let y = random_vector::<f64>(&mut rng(12), 6);
    for bounds in [None, Some(random_box(&mut rng(13), 3, 1.0, 0.0))] {
        let real = op(&inst, Xi::Finite(0.5), bounds.clone()).solve(&y).unwrap();
        let cbounds = bounds.map(|b| {
            let lo = nalgebra::DVector::from_iterator(6, b.lower.iter().copied().chain(std::iter::repeat_n(0.0, 3)));
            let hi = nalgebra::DVector::from_iterator(6, b.upper.iter().copied().chain(std::iter::repeat_n(0.0, 3)));
            BoxConstraints::new(lo, hi).unwrap()
        });
        let cop = PbdwOperator::assemble(embed(&inst.l), embed(&inst.k), Xi::Finite(0.5), cbounds).unwrap();
        let cest = pbdw::estimator::solve_complex(&cop, &y.map(|v| num_complex::Complex64::new(v, 0.0))).unwrap();
        let re = cest.z.map(|v| v.re);
        assert!(rel_diff(&re, &real.z) < 1e-10);
        assert!(cest.z.iter().all(|v| v.im.abs() < 1e-12));
    }
}

#[test]
fn hermitian_block_is_symmetric_psd() {
    let inst = complex_instance(21, 24, 3, 6);
    let o = PbdwOperator::assemble(inst.l.clone(), inst.k.clone(), Xi::Finite(0.2), None).unwrap();
    let h = real_q(&o);
    assert!((&h - h.transpose()).amax() < 1e-12 * h.amax());
    assert!(h.symmetric_eigen().eigenvalues.min() > 0.0);
}

mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsk_core::trainer::{gaussian_gradients, gradients, masked_loss, trapezoid_gradients, BatchMasks};
use tsk_core::Execution;

const STEP: f64 = 1e-6;

fn assert_matches(analytic: &[f64], numeric: &[f64], rel: f64, abs: f64, what: &str) {
    assert_eq!(analytic.len(), numeric.len());
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        assert!(close(*a, *n, rel, abs), "{what}: coordinate {i}: analytic {a} vs numeric {n}");
    }
}

#[test]
fn gaussian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let r = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=8);
        let lambda = if case % 2 == 0 { 0.0 } else { 0.05 };
        let model = random_gaussian_model(&mut rng, r, m);
        let x = random_matrix(&mut rng, n, m, -1.5, 1.5);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = gaussian_gradients(&model, x.view(), &y, None, lambda).unwrap();
        let fd = finite_difference(&model, &x, &y, None, lambda, STEP);
        assert_matches(g.as_slice(), &fd, 1e-5, 1e-8, &format!("case {case}"));
    }
}

#[test]
fn trapezoid_matches_central_differences_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..100 {
        let r = rng.random_range(1..=3);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(1..=8);
        let lambda = if case % 2 == 0 { 0.0 } else { 0.05 };
        let model = random_trapezoid_model(&mut rng, r, m);
        let mut x = Array2::zeros((n, m));
        for i in 0..n {
            for j in 0..m {
                x[[i, j]] = loop {
                    let v = rng.random_range(-2.5..2.5);
                    if kink_distance(&model, j, v) > 1e-3 {
                        break v;
                    }
                };
            }
        }
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = trapezoid_gradients(&model, x.view(), &y, None, lambda).unwrap();
        let fd = finite_difference(&model, &x, &y, None, lambda, STEP);
        assert_matches(g.as_slice(), &fd, 1e-4, 1e-8, &format!("case {case}"));
    }
}

#[test]
fn single_rule_has_no_antecedent_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = random_gaussian_model(&mut rng, 1, 3);
    let x = random_matrix(&mut rng, 6, 3, -1.0, 1.0);
    let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g = gaussian_gradients(&model, x.view(), &y, None, 0.0).unwrap();
    assert!(g.as_slice()[..6].iter().all(|v| v.abs() < 1e-12));
    // consequent gradient reduces to sum_n e_n x_n
    for m in 0..3 {
        let expected: f64 = (0..6)
            .map(|n| (ref_predict(&model, x.row(n).as_slice().unwrap(), None) - y[n]) * x[[n, m]])
            .sum();
        assert!(close(g.as_slice()[7 + m], expected, 1e-12, 1e-12));
    }
}

#[test]
fn family_mismatch_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let model = random_gaussian_model(&mut rng, 2, 2);
    let x = random_matrix(&mut rng, 3, 2, -1.0, 1.0);
    assert!(trapezoid_gradients(&model, x.view(), &[0.0; 3], None, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masked_gradient_matches_masked_loss(seed in any::<u64>(), p in 0.2f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, m, n) = (rng.random_range(2..=4), rng.random_range(1..=3), rng.random_range(1..=8));
        let model = random_gaussian_model(&mut rng, r, m);
        let x = random_matrix(&mut rng, n, m, -1.5, 1.5);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rows: Vec<Vec<bool>> = (0..n).map(|_| (0..r).map(|_| rng.random::<f64>() <= p).collect()).collect();
        let masks = BatchMasks::from_rows(rows.clone()).unwrap();

        let lib = masked_loss(&model, x.view(), &y, Some(&masks), 0.05).unwrap();
        prop_assert!(close(lib, ref_loss(&model, &x, &y, Some(&rows), 0.05), 1e-12, 1e-12));

        let g = gradients(&model, x.view(), &y, Some(&masks), 0.05, Execution::Sequential).unwrap();
        let fd = finite_difference(&model, &x, &y, Some(&rows), 0.05, STEP);
        for (a, b) in g.as_slice().iter().zip(&fd) {
            prop_assert!(close(*a, *b, 1e-5, 1e-8), "analytic {} vs numeric {}", a, b);
        }
    }

    #[test]
    fn dropped_rule_gets_no_gradient(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_gaussian_model(&mut rng, 3, 2);
        let x = random_matrix(&mut rng, 5, 2, -1.0, 1.0);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut masks = BatchMasks::all_kept(5, 3);
        for n in 0..5 {
            masks.set(n, 1, false);
        }
        let g = gradients(&model, x.view(), &y, Some(&masks), 0.0, Execution::Sequential).unwrap();
        let stride = model.rule_stride();
        prop_assert!(g.as_slice()[stride..2 * stride].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parallel_and_sequential_gradients_are_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_trapezoid_model(&mut rng, 4, 3);
        let x = random_matrix(&mut rng, 40, 3, -2.0, 2.0);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = gradients(&model, x.view(), &y, None, 0.05, Execution::Sequential).unwrap();
        let b = gradients(&model, x.view(), &y, None, 0.05, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}

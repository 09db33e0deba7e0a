mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsk_core::{Execution, TskModel};

fn random_model(rng: &mut ChaCha8Rng, trapezoid: bool) -> TskModel {
    let (r, m) = (rng.random_range(1..=5), rng.random_range(1..=4));
    if trapezoid {
        random_trapezoid_model(rng, r, m)
    } else {
        random_gaussian_model(rng, r, m)
    }
}

fn random_input(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(-3.0..3.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn membership_grades_lie_in_unit_interval(seed in any::<u64>(), trapezoid in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, trapezoid);
        let x = random_input(&mut rng, model.num_features());
        for rule in model.rules() {
            for (mf, &v) in rule.antecedents.iter().zip(&x) {
                let g = mf.grade(v);
                prop_assert!((0.0..=1.0).contains(&g));
                prop_assert!(close(g, ref_grade(&mf.params(), v), 1e-14, 1e-15));
            }
        }
    }

    #[test]
    fn normalized_firing_sums_to_one(seed in any::<u64>(), trapezoid in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, trapezoid);
        let x = random_input(&mut rng, model.num_features());
        let fbar = model.normalized_firing_levels(&x, None).unwrap();
        prop_assert!((fbar.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(fbar.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn prediction_is_a_convex_combination(seed in any::<u64>(), trapezoid in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, trapezoid);
        let x = random_input(&mut rng, model.num_features());
        let outputs = model.rule_outputs(&x).unwrap();
        let lo = outputs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = outputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y = model.predict(&x, None).unwrap();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        prop_assert!(y >= lo - slack && y <= hi + slack);
        prop_assert!(close(y, ref_predict(&model, &x, None), 1e-10, 1e-12));
    }

    #[test]
    fn prediction_ignores_rule_order(seed in any::<u64>(), trapezoid in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng, trapezoid);
        let x = random_input(&mut rng, model.num_features());
        let mut rules = model.rules().to_vec();
        rules.reverse();
        if rules.len() > 2 {
            rules.swap(0, 1);
        }
        let permuted = TskModel::new(rules).unwrap();
        let a = model.predict(&x, None).unwrap();
        let b = permuted.predict(&x, None).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}

#[test]
fn batch_prediction_matches_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = random_gaussian_model(&mut rng, 4, 3);
    let x = random_matrix(&mut rng, 200, 3, -2.0, 2.0);
    let seq = model.predict_many(x.view(), Execution::Sequential).unwrap();
    let par = model.predict_many(x.view(), Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    for (row, y) in x.outer_iter().zip(&seq) {
        assert_eq!(model.predict(row.as_slice().unwrap(), None).unwrap(), *y);
    }
}

#[test]
fn far_away_input_falls_back_to_mean_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = random_trapezoid_model(&mut rng, 3, 2);
    let x = [50.0, 50.0];
    let outputs = model.rule_outputs(&x).unwrap();
    let mean = outputs.iter().sum::<f64>() / 3.0;
    assert!((model.predict(&x, None).unwrap() - mean).abs() < 1e-12);
    let fbar = model.normalized_firing_levels(&x, None).unwrap();
    assert!(fbar.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
}

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use tsk_core::{MembershipFunction, Rule, TskModel};

/// Membership grade computed from the raw parameter list, not via the library.
pub fn ref_grade(params: &[f64], x: f64) -> f64 {
    match *params {
        [c, s] => (-(x - c) * (x - c) / (2.0 * s * s)).exp(),
        [a, b, c, d] => {
            if x <= a || x >= d {
                0.0
            } else if x < b {
                (x - a) / (b - a)
            } else if x <= c {
                1.0
            } else {
                (d - x) / (d - c)
            }
        }
        _ => panic!("unexpected parameter count"),
    }
}

/// Reference prediction; `keep` masks rules out of the firing sum.
pub fn ref_predict(model: &TskModel, x: &[f64], keep: Option<&[bool]>) -> f64 {
    let rules = model.rules();
    let mut f = Vec::with_capacity(rules.len());
    let mut y = Vec::with_capacity(rules.len());
    for (r, rule) in rules.iter().enumerate() {
        let kept = keep.is_none_or(|k| k[r]);
        let fire: f64 = rule.antecedents.iter().zip(x).map(|(mf, &v)| ref_grade(&mf.params(), v)).product();
        f.push(if kept { fire } else { 0.0 });
        y.push(rule.bias + rule.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
    }
    let s: f64 = f.iter().sum();
    if s <= 1e-12 {
        y.iter().sum::<f64>() / y.len() as f64
    } else {
        f.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / s
    }
}

pub fn ref_loss(model: &TskModel, x: &Array2<f64>, y: &[f64], masks: Option<&[Vec<bool>]>, lambda: f64) -> f64 {
    let data: f64 = x
        .outer_iter()
        .enumerate()
        .map(|(n, row)| {
            let e = ref_predict(model, row.as_slice().unwrap(), masks.map(|m| &m[n][..])) - y[n];
            e * e
        })
        .sum();
    let ridge: f64 = model.rules().iter().flat_map(|r| r.weights.iter()).map(|w| w * w).sum();
    0.5 * data + 0.5 * lambda * ridge
}

pub fn random_gaussian_model<R: Rng>(rng: &mut R, rules: usize, features: usize) -> TskModel {
    let rules = (0..rules)
        .map(|_| {
            let mfs = (0..features)
                .map(|_| MembershipFunction::gaussian(rng.random_range(-1.0..1.0), rng.random_range(0.5..1.5)).unwrap())
                .collect();
            let w = (0..features).map(|_| rng.random_range(-2.0..2.0)).collect();
            Rule::new(mfs, rng.random_range(-2.0..2.0), w).unwrap()
        })
        .collect();
    TskModel::new(rules).unwrap()
}

pub fn random_trapezoid_model<R: Rng>(rng: &mut R, rules: usize, features: usize) -> TskModel {
    let rules = (0..rules)
        .map(|_| {
            let mfs = (0..features)
                .map(|_| {
                    let a = rng.random_range(-2.5..-1.0);
                    let b = a + rng.random_range(0.3..1.0);
                    let c = b + rng.random_range(0.0..1.0);
                    let d = c + rng.random_range(0.3..1.5);
                    MembershipFunction::trapezoid(a, b, c, d).unwrap()
                })
                .collect();
            let w = (0..features).map(|_| rng.random_range(-2.0..2.0)).collect();
            Rule::new(mfs, rng.random_range(-2.0..2.0), w).unwrap()
        })
        .collect();
    TskModel::new(rules).unwrap()
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

/// `|a - b| <= max(abs, rel * max(|a|, |b|))`
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
}

/// Central differences of `ref_loss` over every parameter coordinate.
pub fn finite_difference(
    model: &TskModel,
    x: &Array2<f64>,
    y: &[f64],
    masks: Option<&[Vec<bool>]>,
    lambda: f64,
    h: f64,
) -> Vec<f64> {
    let theta = model.params();
    (0..theta.len())
        .map(|i| {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let lp = ref_loss(&model.with_params(&plus).unwrap(), x, y, masks, lambda);
            let lm = ref_loss(&model.with_params(&minus).unwrap(), x, y, masks, lambda);
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

/// Distance from `v` to the nearest trapezoid corner used by feature `m`.
pub fn kink_distance(model: &TskModel, m: usize, v: f64) -> f64 {
    model
        .rules()
        .iter()
        .flat_map(|r| r.antecedents[m].params())
        .map(|k| (k - v).abs())
        .fold(f64::INFINITY, f64::min)
}

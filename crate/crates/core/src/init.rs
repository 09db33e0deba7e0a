//! Clustering-based rule initialization.
//!
//! Gaussian models start from a fuzzy c-means partition, trapezoidal models
//! from k-means. Both clusterings seed their centers with `R` distinct
//! samples drawn from the caller's RNG.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TskError};
use crate::exec::Execution;
use crate::membership::MembershipFunction;
use crate::model::{Rule, TskModel};

pub const FCM_FUZZIFIER: f64 = 2.0;
pub const FCM_MAX_ITER: usize = 100;
pub const FCM_TOL: f64 = 1e-5;
pub const KMEANS_MAX_ITER: usize = 100;
/// Lower bound on initial spreads, in normalized feature units.
pub const SIGMA_MIN: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// `R x M`
    pub centers: Array2<f64>,
    /// `R x N`; fuzzy partition for c-means, 0/1 assignments for k-means.
    pub memberships: Array2<f64>,
    pub iterations: usize,
    /// Clustering objective after each iteration.
    pub objective: Vec<f64>,
}

fn check_sizes(x: ArrayView2<'_, f64>, r: usize) -> Result<()> {
    if r == 0 {
        return Err(TskError::InvalidConfig("number of clusters must be at least 1".into()));
    }
    if x.ncols() == 0 {
        return Err(TskError::EmptyInput("clustering needs at least one feature"));
    }
    if x.nrows() < r {
        return Err(TskError::InsufficientData {
            samples: x.nrows(),
            clusters: r,
        });
    }
    Ok(())
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn initial_centers<R: Rng + ?Sized>(x: ArrayView2<'_, f64>, r: usize, rng: &mut R) -> Array2<f64> {
    let picks = sample(rng, x.nrows(), r);
    let mut centers = Array2::zeros((r, x.ncols()));
    for (k, n) in picks.iter().enumerate() {
        centers.row_mut(k).assign(&x.row(n));
    }
    centers
}

/// Fuzzy membership column of one sample given squared distances to every
/// center. Samples sitting on one or more centers split their membership
/// evenly between those centers.
fn fcm_column(d2: &[f64]) -> Vec<f64> {
    let zeros = d2.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        return d2
            .iter()
            .map(|&d| if d == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    // u_r = 1 / sum_k (d_r / d_k)^(2/(m-1)); with m = 2 this is (1/d_r^2) / sum_k (1/d_k^2)
    let exp = 1.0 / (FCM_FUZZIFIER - 1.0);
    let inv: Vec<f64> = d2.iter().map(|&d| (1.0 / d).powf(exp)).collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|v| v / total).collect()
}

/// Fuzzy c-means with fuzzifier 2.
pub fn fuzzy_c_means(x: ArrayView2<'_, f64>, r: usize, seed: u64) -> Result<ClusterResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fuzzy_c_means_with_rng(x, r, &mut rng, Execution::default())
}

pub fn fuzzy_c_means_with_rng<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    r: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<ClusterResult> {
    check_sizes(x, r)?;
    let (n, m) = x.dim();
    let mut centers = initial_centers(x, r, rng);
    let mut memberships = Array2::zeros((r, n));
    let mut objective = Vec::new();
    let mut iterations = 0;

    for _ in 0..FCM_MAX_ITER {
        iterations += 1;
        let cols = exec.map(n, |i| {
            let d2: Vec<f64> = centers.outer_iter().map(|c| sq_dist(x.row(i), c)).collect();
            let u = fcm_column(&d2);
            let obj: f64 = u
                .iter()
                .zip(&d2)
                .map(|(u, d)| u.powf(FCM_FUZZIFIER) * d)
                .sum();
            (u, obj)
        });
        for (i, (u, _)) in cols.iter().enumerate() {
            for k in 0..r {
                memberships[[k, i]] = u[k];
            }
        }
        objective.push(cols.iter().map(|(_, o)| o).sum());

        let mut next = Array2::zeros((r, m));
        for k in 0..r {
            let weights = memberships.row(k).mapv(|u| u.powf(FCM_FUZZIFIER));
            let total = weights.sum();
            if total > 0.0 {
                for (i, w) in weights.iter().enumerate() {
                    next.row_mut(k).scaled_add(*w / total, &x.row(i));
                }
            } else {
                next.row_mut(k).assign(&centers.row(k));
            }
        }
        let shift = centers
            .outer_iter()
            .zip(next.outer_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if shift < FCM_TOL {
            break;
        }
    }

    // memberships consistent with the final centers
    let cols = exec.map(n, |i| {
        let d2: Vec<f64> = centers.outer_iter().map(|c| sq_dist(x.row(i), c)).collect();
        fcm_column(&d2)
    });
    for (i, u) in cols.iter().enumerate() {
        for k in 0..r {
            memberships[[k, i]] = u[k];
        }
    }

    Ok(ClusterResult {
        centers,
        memberships,
        iterations,
        objective,
    })
}

/// Lloyd's k-means.
pub fn k_means(x: ArrayView2<'_, f64>, r: usize, seed: u64) -> Result<ClusterResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    k_means_with_rng(x, r, &mut rng, Execution::default())
}

pub fn k_means_with_rng<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    r: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<ClusterResult> {
    check_sizes(x, r)?;
    let (n, m) = x.dim();
    let mut centers = initial_centers(x, r, rng);
    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let nearest = exec.map(n, |i| {
            let mut best = (0, f64::INFINITY);
            for (k, c) in centers.outer_iter().enumerate() {
                let d = sq_dist(x.row(i), c);
                if d < best.1 {
                    best = (k, d);
                }
            }
            best
        });
        let changed = nearest.iter().zip(&assignment).any(|((k, _), a)| k != a);
        for (a, (k, _)) in assignment.iter_mut().zip(&nearest) {
            *a = *k;
        }
        objective.push(nearest.iter().map(|(_, d)| d).sum());
        if !changed {
            break;
        }

        let mut sums = Array2::<f64>::zeros((r, m));
        let mut counts = vec![0usize; r];
        for (i, &k) in assignment.iter().enumerate() {
            sums.row_mut(k).scaled_add(1.0, &x.row(i));
            counts[k] += 1;
        }
        for k in 0..r {
            if counts[k] > 0 {
                let mean = &sums.row(k) / counts[k] as f64;
                centers.row_mut(k).assign(&mean);
            }
        }
        // Empty clusters jump to the sample farthest from its own center.
        for k in 0..r {
            if counts[k] == 0 {
                let far = (0..n)
                    .map(|i| (i, sq_dist(x.row(i), centers.row(assignment[i]))))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                centers.row_mut(k).assign(&x.row(far.0));
                counts[k] = 1;
            }
        }
    }

    let mut memberships = Array2::zeros((r, n));
    for (i, &k) in assignment.iter().enumerate() {
        memberships[[k, i]] = 1.0;
    }
    Ok(ClusterResult {
        centers,
        memberships,
        iterations,
        objective,
    })
}

/// Weighted mean and (population) standard deviation.
fn weighted_mean_std(values: ArrayView1<'_, f64>, weights: ArrayView1<'_, f64>) -> (f64, f64) {
    let total = weights.sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().zip(weights.iter()).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights.iter())
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum::<f64>()
        / total;
    (mean, var.max(0.0).sqrt())
}

fn check_targets(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(TskError::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Gaussian rule base from a fuzzy c-means partition.
pub fn init_gaussian_model(x: ArrayView2<'_, f64>, y: &[f64], r: usize, seed: u64) -> Result<TskModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_gaussian_model_with_rng(x, y, r, &mut rng, Execution::default())
}

pub fn init_gaussian_model_with_rng<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    r: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<TskModel> {
    check_targets(x, y)?;
    let clusters = fuzzy_c_means_with_rng(x, r, rng, exec)?;
    gaussian_model_from_partition(x, y, &clusters)
}

pub fn gaussian_model_from_partition(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    clusters: &ClusterResult,
) -> Result<TskModel> {
    check_targets(x, y)?;
    let m = x.ncols();
    let rules = clusters
        .memberships
        .outer_iter()
        .zip(clusters.centers.outer_iter())
        .map(|(u, center)| {
            let total = u.sum();
            let bias = if total > 0.0 {
                y.iter().zip(u.iter()).map(|(t, w)| t * w).sum::<f64>() / total
            } else {
                0.0
            };
            let antecedents = (0..m)
                .map(|j| {
                    let (_, std) = weighted_mean_std(x.column(j), u);
                    MembershipFunction::gaussian(center[j], std.max(SIGMA_MIN))
                })
                .collect::<Result<Vec<_>>>()?;
            Rule::new(antecedents, bias, vec![0.0; m])
        })
        .collect::<Result<Vec<_>>>()?;
    TskModel::new(rules)
}

/// Long-legged trapezoid around `center` for an in-cluster spread `sigma`.
pub fn long_leg_trapezoid(center: f64, sigma: f64) -> Result<MembershipFunction> {
    let s = sigma.max(SIGMA_MIN);
    MembershipFunction::trapezoid(center - 10.0 * s, center - 0.5 * s, center + 0.5 * s, center + 10.0 * s)
}

/// Trapezoidal rule base from a k-means partition.
pub fn init_trapezoid_model(x: ArrayView2<'_, f64>, y: &[f64], r: usize, seed: u64) -> Result<TskModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_trapezoid_model_with_rng(x, y, r, &mut rng, Execution::default())
}

pub fn init_trapezoid_model_with_rng<R: Rng + ?Sized>(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    r: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<TskModel> {
    check_targets(x, y)?;
    let clusters = k_means_with_rng(x, r, rng, exec)?;
    trapezoid_model_from_partition(x, y, &clusters)
}

pub fn trapezoid_model_from_partition(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    clusters: &ClusterResult,
) -> Result<TskModel> {
    check_targets(x, y)?;
    let m = x.ncols();
    let rules = clusters
        .memberships
        .outer_iter()
        .zip(clusters.centers.outer_iter())
        .map(|(u, center)| {
            let count = u.sum();
            let bias = if count > 0.0 {
                y.iter().zip(u.iter()).map(|(t, w)| t * w).sum::<f64>() / count
            } else {
                0.0
            };
            let antecedents = (0..m)
                .map(|j| {
                    let (_, std) = weighted_mean_std(x.column(j), u);
                    long_leg_trapezoid(center[j], std)
                })
                .collect::<Result<Vec<_>>>()?;
            Rule::new(antecedents, bias, vec![0.0; m])
        })
        .collect::<Result<Vec<_>>>()?;
    TskModel::new(rules)
}

/// Column sums of a membership matrix, one per sample.
pub fn membership_column_sums(memberships: &Array2<f64>) -> Vec<f64> {
    memberships.sum_axis(Axis(0)).to_vec()
}

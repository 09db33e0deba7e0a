//! Rule pruning: drop weakly firing rules, merge rules whose firing patterns
//! overlap, then refine the survivors with further training.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};
use crate::exec::Execution;
use crate::model::{normalize_firing, Rule, TskModel};
use crate::trainer::{train_with_rng, EpochLog, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub initial_rules: usize,
    pub total_epochs: usize,
    pub firing_threshold: f64,
    pub similarity_threshold: f64,
    pub prune_iterations: usize,
    /// Training settings for every phase; `num_rules` and `epochs` are
    /// overridden by `initial_rules` and the epoch schedule.
    pub train: TrainConfig,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            initial_rules: 32,
            total_epochs: 500,
            firing_threshold: 0.5,
            similarity_threshold: 0.5,
            prune_iterations: 3,
            train: TrainConfig::default(),
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_rules == 0 {
            return Err(TskError::InvalidConfig("initial_rules must be at least 1".into()));
        }
        if !(self.firing_threshold >= 0.0) {
            return Err(TskError::InvalidConfig(format!(
                "firing_threshold must be nonnegative, got {}",
                self.firing_threshold
            )));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold < 1.0) {
            return Err(TskError::InvalidConfig(format!(
                "similarity_threshold must lie in (0, 1), got {}",
                self.similarity_threshold
            )));
        }
        epoch_schedule(self.total_epochs, self.prune_iterations)?;
        TrainConfig {
            num_rules: self.initial_rules,
            ..self.train.clone()
        }
        .validate()
    }
}

/// Epochs per phase: `round(0.6 K0)` for the initial training, then
/// `round(0.4 K0 / (T - 1))` for each of the `T - 1` refinements.
pub fn epoch_schedule(total_epochs: usize, iterations: usize) -> Result<Vec<usize>> {
    if iterations < 2 {
        return Err(TskError::InvalidConfig(format!(
            "prune_iterations must be at least 2, got {iterations}"
        )));
    }
    if total_epochs < iterations {
        return Err(TskError::InvalidConfig(format!(
            "total_epochs ({total_epochs}) must be at least prune_iterations ({iterations})"
        )));
    }
    let k0 = total_epochs as f64;
    let first = (0.6 * k0).round() as usize;
    let rest = (0.4 * k0 / (iterations - 1) as f64).round() as usize;
    let mut out = vec![rest; iterations];
    out[0] = first;
    Ok(out)
}

/// Merge counts per surviving rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleWeights(pub Vec<usize>);

impl RuleWeights {
    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `R x N` normalized firing levels of every rule on every sample.
pub fn normalized_firing_matrix(model: &TskModel, x: ArrayView2<'_, f64>, exec: Execution) -> Result<Array2<f64>> {
    if x.ncols() != model.num_features() {
        return Err(TskError::DimensionMismatch {
            expected: model.num_features(),
            got: x.ncols(),
        });
    }
    let x = x.as_standard_layout();
    let x = x.view();
    let cols = exec.map(x.nrows(), |n| {
        let row = x.row(n);
        normalize_firing(&model.firing_levels_unchecked(row.as_slice().expect("standard layout")))
    });
    let r = model.num_rules();
    Ok(Array2::from_shape_fn((r, x.nrows()), |(k, n)| cols[n][k]))
}

/// Per-rule sum of normalized firing levels over the samples.
pub fn firing_strengths(model: &TskModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let fbar = normalized_firing_matrix(model, x, Execution::default())?;
    Ok(fbar.outer_iter().map(|row| row.iter().sum()).collect())
}

/// Standard median; mean of the two middle values for an even count.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Indices of rules whose strength is at least `gamma * median`. The
/// strongest rule always survives.
pub fn low_firing_filter(strengths: &[f64], gamma: f64) -> Vec<usize> {
    if strengths.is_empty() {
        return Vec::new();
    }
    let threshold = gamma * median(strengths);
    let mut keep: Vec<usize> = (0..strengths.len()).filter(|&r| strengths[r] >= threshold).collect();
    if keep.is_empty() {
        let best = (0..strengths.len())
            .max_by(|&a, &b| strengths[a].total_cmp(&strengths[b]).then(b.cmp(&a)))
            .expect("nonempty");
        keep.push(best);
    }
    keep
}

/// Fuzzy Jaccard similarity: `sum min(a, b) / sum max(a, b)`, 0 when both
/// vectors are all zero.
pub fn jaccard_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (num, den) = a
        .iter()
        .zip(b)
        .fold((0.0, 0.0), |(num, den), (&p, &q)| (num + p.min(q), den + p.max(q)));
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Symmetric similarity matrix with a zero diagonal.
pub fn similarity_matrix(fbar: &Array2<f64>, exec: Execution) -> Array2<f64> {
    let r = fbar.nrows();
    let rows: Vec<Vec<f64>> = fbar
        .outer_iter()
        .map(|row| row.as_standard_layout().to_vec())
        .collect();
    let upper = exec.map(r, |i| {
        ((i + 1)..r)
            .map(|j| jaccard_similarity(&rows[i], &rows[j]))
            .collect::<Vec<_>>()
    });
    let mut s = Array2::zeros((r, r));
    for (i, vals) in upper.into_iter().enumerate() {
        for (off, v) in vals.into_iter().enumerate() {
            let j = i + 1 + off;
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    s
}

pub fn build_similarity_matrix(model: &TskModel, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let exec = Execution::default();
    Ok(similarity_matrix(&normalized_firing_matrix(model, x, exec)?, exec))
}

/// Largest strictly-upper-triangular entry; ties go to the smallest `(i, j)`.
pub fn max_upper(s: &Array2<f64>) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            let v = s[[i, j]];
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((i, j, v));
            }
        }
    }
    best
}

/// Replaces rule `i` by the merge-count-weighted average of rules `i` and
/// `j`, removes rule `j`, and bumps `w_i` by one.
pub fn merge_rules(model: &TskModel, weights: &RuleWeights, i: usize, j: usize) -> Result<(TskModel, RuleWeights)> {
    let r = model.num_rules();
    for idx in [i, j] {
        if idx >= r {
            return Err(TskError::IndexOutOfRange { index: idx, len: r });
        }
    }
    if weights.len() != r {
        return Err(TskError::DimensionMismatch {
            expected: r,
            got: weights.len(),
        });
    }
    if i == j {
        return Err(TskError::InvalidConfig("cannot merge a rule with itself".into()));
    }
    let wi = weights.0[i] as f64;
    let wj = weights.0[j] as f64;
    let avg = |p: f64, q: f64| (wi * p + wj * q) / (wi + wj);

    let (ri, rj) = (&model.rules()[i], &model.rules()[j]);
    let antecedents = ri
        .antecedents
        .iter()
        .zip(&rj.antecedents)
        .map(|(a, b)| {
            let merged: Vec<f64> = a.params().iter().zip(b.params()).map(|(&p, q)| avg(p, q)).collect();
            a.with_params(&merged)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = Rule::new(
        antecedents,
        avg(ri.bias, rj.bias),
        ri.weights.iter().zip(&rj.weights).map(|(&p, &q)| avg(p, q)).collect(),
    )?;

    let mut rules = model.rules().to_vec();
    rules[i] = merged;
    rules.remove(j);
    let mut w = weights.0.clone();
    w[i] += 1;
    w.remove(j);
    Ok((TskModel::new(rules)?, RuleWeights(w)))
}

/// Row/column bookkeeping for a merge of `j` into `i`; the diagonal stays 0.
fn merge_similarity(s: &Array2<f64>, i: usize, j: usize) -> Array2<f64> {
    let mut s = s.clone();
    let r = s.nrows();
    for k in 0..r {
        s[[i, k]] = 0.5 * (s[[i, k]] + s[[j, k]]);
    }
    for k in 0..r {
        s[[k, i]] = 0.5 * (s[[k, i]] + s[[k, j]]);
    }
    s[[i, i]] = 0.0;
    let keep: Vec<usize> = (0..r).filter(|&k| k != j).collect();
    s.select(ndarray::Axis(0), &keep).select(ndarray::Axis(1), &keep)
}

/// Outcome of one filter-and-merge round, before refinement.
#[derive(Debug, Clone)]
pub struct PruneRound {
    pub model: TskModel,
    pub weights: RuleWeights,
    pub removed_by_gamma: usize,
    pub removed_by_theta: usize,
    /// Maintained similarity matrix when the merge loop stopped.
    pub final_similarity: Array2<f64>,
}

/// Firing filter followed by iterated max-similarity merging.
pub fn prune_round(
    model: &TskModel,
    weights: &RuleWeights,
    x_train: ArrayView2<'_, f64>,
    gamma: f64,
    theta: f64,
    exec: Execution,
) -> Result<PruneRound> {
    let fbar = normalized_firing_matrix(model, x_train, exec)?;
    let strengths: Vec<f64> = fbar.outer_iter().map(|row| row.iter().sum()).collect();
    let keep = low_firing_filter(&strengths, gamma);
    let removed_by_gamma = model.num_rules() - keep.len();
    let mut model = model.retain_indices(&keep)?;
    let mut weights = RuleWeights(keep.iter().map(|&k| weights.0[k]).collect());

    let mut s = similarity_matrix(&normalized_firing_matrix(&model, x_train, exec)?, exec);
    let mut removed_by_theta = 0;
    while let Some((i, j, v)) = max_upper(&s) {
        if !(v > theta) {
            break;
        }
        let (m, w) = merge_rules(&model, &weights, i, j)?;
        model = m;
        weights = w;
        s = merge_similarity(&s, i, j);
        removed_by_theta += 1;
    }
    Ok(PruneRound {
        model,
        weights,
        removed_by_gamma,
        removed_by_theta,
        final_similarity: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneHistory {
    pub iteration: usize,
    pub rules_before: usize,
    pub removed_by_gamma: usize,
    pub removed_by_theta: usize,
    pub rules_after: usize,
    pub test_rmse: f64,
}

/// Writes `iteration,rules_before,removed_by_gamma,removed_by_theta,rules_after,test_rmse`.
pub fn write_prune_csv<W: Write>(mut out: W, history: &[PruneHistory]) -> std::io::Result<()> {
    writeln!(out, "iteration,rules_before,removed_by_gamma,removed_by_theta,rules_after,test_rmse")?;
    for h in history {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            h.iteration, h.rules_before, h.removed_by_gamma, h.removed_by_theta, h.rules_after, h.test_rmse
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Pruned {
    pub model: TskModel,
    pub history: Vec<PruneHistory>,
    /// Epoch log across all training phases, numbered consecutively.
    pub log: Vec<EpochLog>,
}

pub fn prune_and_refine(
    x_train: ArrayView2<'_, f64>,
    y_train: &[f64],
    x_test: ArrayView2<'_, f64>,
    y_test: &[f64],
    config: &PruneConfig,
) -> Result<Pruned> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    prune_and_refine_with_rng(x_train, y_train, x_test, y_test, config, &mut rng)
}

/// Trains `R0` rules, then alternates pruning rounds with refinement. Each
/// refinement starts a fresh optimizer.
pub fn prune_and_refine_with_rng<R: Rng + ?Sized>(
    x_train: ArrayView2<'_, f64>,
    y_train: &[f64],
    x_test: ArrayView2<'_, f64>,
    y_test: &[f64],
    config: &PruneConfig,
    rng: &mut R,
) -> Result<Pruned> {
    config.validate()?;
    let schedule = epoch_schedule(config.total_epochs, config.prune_iterations)?;
    let exec = config.train.execution;
    let phase = |epochs: usize, rules: usize| TrainConfig {
        num_rules: rules,
        epochs,
        ..config.train.clone()
    };

    let mut log = Vec::new();
    let first = train_with_rng(
        x_train,
        y_train,
        x_test,
        y_test,
        &phase(schedule[0], config.initial_rules),
        None,
        rng,
        |_| {},
    )?;
    log.extend(first.log);
    let mut model = first.model;
    let mut weights = RuleWeights::ones(model.num_rules());
    let mut history = Vec::with_capacity(schedule.len() - 1);

    for (t, &epochs) in schedule.iter().enumerate().skip(1) {
        let rules_before = model.num_rules();
        let round = prune_round(
            &model,
            &weights,
            x_train,
            config.firing_threshold,
            config.similarity_threshold,
            exec,
        )?;
        weights = round.weights;
        let rules_after = round.model.num_rules();
        let refined = train_with_rng(
            x_train,
            y_train,
            x_test,
            y_test,
            &phase(epochs, rules_after),
            Some(round.model),
            rng,
            |_| {},
        )?;
        let offset = log.len();
        log.extend(refined.log.into_iter().map(|mut e| {
            e.epoch += offset;
            e
        }));
        model = refined.model;
        let test_rmse = if x_test.nrows() > 0 {
            model.rmse_on(x_test, y_test, exec)?
        } else {
            f64::NAN
        };
        history.push(PruneHistory {
            iteration: t + 1,
            rules_before,
            removed_by_gamma: round.removed_by_gamma,
            removed_by_theta: round.removed_by_theta,
            rules_after,
            test_rmse,
        });
    }

    Ok(Pruned { model, history, log })
}

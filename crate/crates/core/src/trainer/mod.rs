//! Mini-batch gradient descent with ridge regularization, DropRule and
//! AdaBound (MBGD-RDA) for Gaussian and trapezoidal TSK models.

mod adabound;
mod gradients;

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adabound::{rate_bounds, AdaBoundState, BETA1, BETA2, EPSILON, FINAL_LR};
pub use gradients::{
    gaussian_gradients, gradients, loss, masked_loss, trapezoid_gradients, BatchMasks, GradientVector,
};

use crate::error::{Result, TskError};
use crate::exec::Execution;
use crate::init::{init_gaussian_model_with_rng, init_trapezoid_model_with_rng, SIGMA_MIN};
use crate::membership::{MembershipFunction, MfType};
use crate::model::TskModel;

/// Separation restored between coincident trapezoid corners.
pub const TRAPEZOID_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub num_rules: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub droprule_rate: f64,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub seed: u64,
    pub mf_type: MfType,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_rules: 32,
            epochs: 500,
            batch_size: 64,
            droprule_rate: 0.5,
            learning_rate: 0.01,
            l2_lambda: 0.05,
            seed: 0,
            mf_type: MfType::Gaussian,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(TskError::InvalidConfig(msg));
        if self.num_rules == 0 {
            return fail("num_rules must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.droprule_rate > 0.0 && self.droprule_rate <= 1.0) {
            return fail(format!("droprule_rate must lie in (0, 1], got {}", self.droprule_rate));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return fail(format!("l2_lambda must be nonnegative, got {}", self.l2_lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_batch_loss: f64,
    pub test_rmse: f64,
}

/// Writes `epoch,train_batch_loss,test_rmse` rows with a header.
pub fn write_epoch_csv<W: Write>(mut out: W, log: &[EpochLog]) -> std::io::Result<()> {
    writeln!(out, "epoch,train_batch_loss,test_rmse")?;
    for row in log {
        writeln!(out, "{},{},{}", row.epoch, row.train_batch_loss, row.test_rmse)?;
    }
    Ok(())
}

/// Snapshot handed to a training observer after each epoch's update.
pub struct EpochReport<'a> {
    pub log: EpochLog,
    pub model: &'a TskModel,
    pub optimizer: &'a AdaBoundState,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: TskModel,
    pub log: Vec<EpochLog>,
}

/// Per-sample DropRule mask: each rule kept independently with probability `p`.
pub fn droprule_mask<R: Rng + ?Sized>(num_rules: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..num_rules).map(|_| rng.random::<f64>() <= p).collect()
}

/// Sorts each trapezoid's corners and separates coincident feet and shoulders.
pub fn enforce_trapezoid_order(model: &mut TskModel) {
    for rule in model.rules_mut() {
        for mf in &mut rule.antecedents {
            if let MembershipFunction::Trapezoid(t) = mf {
                let p = sorted_trapezoid(t.points());
                mf.set_params_unchecked(&p);
            }
        }
    }
}

fn sorted_trapezoid(mut p: [f64; 4]) -> [f64; 4] {
    p.sort_by(f64::total_cmp);
    let [mut a, mut b, mut c, mut d] = p;
    if a == b {
        b = a + TRAPEZOID_SEPARATION;
    }
    if c == d {
        c = d - TRAPEZOID_SEPARATION;
    }
    // Only reachable when three or four corners nearly coincide.
    if b > c {
        let mid = 0.5 * (b + c);
        b = mid;
        c = mid;
        if a >= b {
            a = b - TRAPEZOID_SEPARATION;
        }
        if d <= c {
            d = c + TRAPEZOID_SEPARATION;
        }
    }
    [a, b, c, d]
}

fn clamp_spreads(model: &mut TskModel) {
    for rule in model.rules_mut() {
        for mf in &mut rule.antecedents {
            if let MembershipFunction::Gaussian(g) = mf {
                if !(g.spread() >= SIGMA_MIN) {
                    let c = g.center();
                    mf.set_params_unchecked(&[c, SIGMA_MIN]);
                }
            }
        }
    }
}

fn gather_rows(x: ArrayView2<'_, f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn check_data(x: ArrayView2<'_, f64>, y: &[f64], what: &'static str) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(TskError::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 && what == "training" {
        return Err(TskError::EmptyInput("training set is empty"));
    }
    Ok(())
}

/// Trains with an RNG seeded from `config.seed`.
pub fn train(
    x_train: ArrayView2<'_, f64>,
    y_train: &[f64],
    x_test: ArrayView2<'_, f64>,
    y_test: &[f64],
    config: &TrainConfig,
    initial: Option<TskModel>,
) -> Result<Trained> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_with_rng(x_train, y_train, x_test, y_test, config, initial, &mut rng, |_| {})
}

/// Builds the initial model for `config` when none is supplied.
pub fn initial_model<R: Rng + ?Sized>(
    x_train: ArrayView2<'_, f64>,
    y_train: &[f64],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TskModel> {
    match config.mf_type {
        MfType::Gaussian => {
            init_gaussian_model_with_rng(x_train, y_train, config.num_rules, rng, config.execution)
        }
        MfType::Trapezoid => {
            init_trapezoid_model_with_rng(x_train, y_train, config.num_rules, rng, config.execution)
        }
    }
}

/// Full training loop drawing all randomness (initialization, mini-batches,
/// DropRule) from `rng`. `observer` sees the model after every epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_with_rng<R, F>(
    x_train: ArrayView2<'_, f64>,
    y_train: &[f64],
    x_test: ArrayView2<'_, f64>,
    y_test: &[f64],
    config: &TrainConfig,
    initial: Option<TskModel>,
    rng: &mut R,
    mut observer: F,
) -> Result<Trained>
where
    R: Rng + ?Sized,
    F: FnMut(&EpochReport<'_>),
{
    config.validate()?;
    check_data(x_train, y_train, "training")?;
    check_data(x_test, y_test, "test")?;

    let mut model = match initial {
        Some(m) => m,
        None => initial_model(x_train, y_train, config, rng)?,
    };
    if model.num_features() != x_train.ncols() {
        return Err(TskError::DimensionMismatch {
            expected: model.num_features(),
            got: x_train.ncols(),
        });
    }
    if x_test.nrows() > 0 && x_test.ncols() != x_train.ncols() {
        return Err(TskError::DimensionMismatch {
            expected: x_train.ncols(),
            got: x_test.ncols(),
        });
    }

    let n = x_train.nrows();
    let exec = config.execution;
    let mut optimizer = AdaBoundState::new(model.num_params());
    let mut theta = model.params();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let idx: Vec<usize> = if config.batch_size <= n {
            sample(rng, n, config.batch_size).into_vec()
        } else {
            (0..config.batch_size).map(|_| rng.random_range(0..n)).collect()
        };
        let bx = gather_rows(x_train, &idx);
        let by: Vec<f64> = idx.iter().map(|&i| y_train[i]).collect();

        let r = model.num_rules();
        let mut masks = BatchMasks::all_kept(idx.len(), r);
        for s in 0..idx.len() {
            for (k, keep) in droprule_mask(r, config.droprule_rate, rng).into_iter().enumerate() {
                masks.set(s, k, keep);
            }
        }

        let (grad, batch_loss) =
            gradients::batch_gradient(&model, bx.view(), &by, Some(&masks), config.l2_lambda, exec)?;
        optimizer.step(&mut theta, grad.as_slice(), config.learning_rate);
        model.set_params_unchecked(&theta);
        match model.mf_type() {
            MfType::Gaussian => clamp_spreads(&mut model),
            MfType::Trapezoid => enforce_trapezoid_order(&mut model),
        }
        theta = model.params();

        let test_rmse = if x_test.nrows() > 0 {
            model.rmse_on(x_test, y_test, exec)?
        } else {
            f64::NAN
        };
        let entry = EpochLog {
            epoch,
            train_batch_loss: batch_loss,
            test_rmse,
        };
        log.push(entry);
        observer(&EpochReport {
            log: entry,
            model: &model,
            optimizer: &optimizer,
        });
    }

    Ok(Trained { model, log })
}

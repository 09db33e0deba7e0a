//! Analytic gradients of the regularized squared-error loss.
//!
//! Per sample with (masked) firing levels `f_r`, sum `S`, rule outputs `y_r`
//! and error `e = y(x) - y_n`:
//!
//! * `dL/df_r = e (y_r - y(x)) / S`
//! * `dL/dw_{r,0} = e f_r / S`, `dL/dw_{r,m} = e f_r x_m / S`
//!
//! and the membership parameters follow by the chain rule through `f_r`.
//! The ridge term `lambda * w_{r,m}` (m >= 1) is added once per batch.

use ndarray::ArrayView2;

use crate::error::{Result, TskError};
use crate::exec::Execution;
use crate::membership::{MembershipFunction, MfType};
use crate::model::{TskModel, FIRING_EPS};

/// Gradient with the same layout as [`TskModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row-major `batch x R` DropRule mask; `true` keeps the rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchMasks {
    num_rules: usize,
    keep: Vec<bool>,
}

impl BatchMasks {
    pub fn all_kept(batch: usize, num_rules: usize) -> Self {
        Self {
            num_rules,
            keep: vec![true; batch * num_rules],
        }
    }

    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self> {
        let num_rules = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_rules) {
            return Err(TskError::InvalidConfig("ragged DropRule mask".into()));
        }
        Ok(Self {
            num_rules,
            keep: rows.into_iter().flatten().collect(),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.keep.len().checked_div(self.num_rules).unwrap_or(0)
    }

    pub fn num_rules(&self) -> usize {
        self.num_rules
    }

    pub fn row(&self, n: usize) -> &[bool] {
        &self.keep[n * self.num_rules..(n + 1) * self.num_rules]
    }

    pub fn set(&mut self, n: usize, r: usize, keep: bool) {
        self.keep[n * self.num_rules + r] = keep;
    }
}

/// Masked forward pass shared by the loss and the gradients.
pub(crate) struct Forward {
    pub firing: Vec<f64>,
    pub outputs: Vec<f64>,
    pub sum: f64,
    pub prediction: f64,
}

pub(crate) fn forward(model: &TskModel, x: &[f64], mask: Option<&[bool]>) -> Forward {
    let rules = model.rules();
    let firing: Vec<f64> = rules
        .iter()
        .enumerate()
        .map(|(r, rule)| match mask {
            Some(keep) if !keep[r] => 0.0,
            _ => rule.firing_level_unchecked(x),
        })
        .collect();
    let outputs: Vec<f64> = rules.iter().map(|rule| rule.output_unchecked(x)).collect();
    let sum: f64 = firing.iter().sum();
    let prediction = if sum > FIRING_EPS {
        firing.iter().zip(&outputs).map(|(f, y)| f * y).sum::<f64>() / sum
    } else {
        outputs.iter().sum::<f64>() / outputs.len() as f64
    };
    Forward {
        firing,
        outputs,
        sum,
        prediction,
    }
}

fn check_batch(model: &TskModel, x: ArrayView2<'_, f64>, y: &[f64], masks: Option<&BatchMasks>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(TskError::EmptyInput("batch must contain at least one sample"));
    }
    if x.ncols() != model.num_features() {
        return Err(TskError::DimensionMismatch {
            expected: model.num_features(),
            got: x.ncols(),
        });
    }
    if y.len() != x.nrows() {
        return Err(TskError::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if let Some(m) = masks {
        if m.batch_size() != x.nrows() || m.num_rules() != model.num_rules() {
            return Err(TskError::DimensionMismatch {
                expected: x.nrows() * model.num_rules(),
                got: m.batch_size() * m.num_rules(),
            });
        }
    }
    Ok(())
}

fn ridge_penalty(model: &TskModel, lambda: f64) -> f64 {
    let sq: f64 = model
        .rules()
        .iter()
        .flat_map(|r| r.weights.iter())
        .map(|w| w * w)
        .sum();
    0.5 * lambda * sq
}

/// `1/2 sum_n (y_n - y(x_n))^2 + lambda/2 sum_{r, m>=1} w_{r,m}^2`; biases are
/// not penalized.
pub fn loss(model: &TskModel, x: ArrayView2<'_, f64>, y: &[f64], lambda: f64) -> Result<f64> {
    masked_loss(model, x, y, None, lambda)
}

/// Same as [`loss`] with DropRule masks applied to the firing levels.
pub fn masked_loss(
    model: &TskModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    masks: Option<&BatchMasks>,
    lambda: f64,
) -> Result<f64> {
    check_batch(model, x, y, masks)?;
    let x = x.as_standard_layout();
    let mut data = 0.0;
    for (n, row) in x.outer_iter().enumerate() {
        let fw = forward(model, row.as_slice().expect("standard layout"), masks.map(|m| m.row(n)));
        let e = fw.prediction - y[n];
        data += e * e;
    }
    Ok(0.5 * data + ridge_penalty(model, lambda))
}

/// Adds the data-term gradient of one sample into `out` and returns its
/// squared error.
fn sample_gradient(model: &TskModel, x: &[f64], target: f64, mask: Option<&[bool]>, out: &mut [f64]) -> f64 {
    let fw = forward(model, x, mask);
    let e = fw.prediction - target;
    let r_count = model.num_rules();
    let m_count = model.num_features();
    let p = model.mf_type().num_params();
    let stride = model.rule_stride();

    if fw.sum <= FIRING_EPS {
        // uniform fallback: consequents share equally, memberships get nothing
        let share = e / r_count as f64;
        for r in 0..r_count {
            let b = model.bias_offset(r);
            out[b] += share;
            for m in 0..m_count {
                out[b + 1 + m] += share * x[m];
            }
        }
        return e * e;
    }

    let mut grades = vec![0.0; m_count];
    let mut prefix = vec![1.0; m_count + 1];
    for (r, rule) in model.rules().iter().enumerate() {
        let f = fw.firing[r];
        if f <= 0.0 {
            continue;
        }
        let base = r * stride;
        let fbar = f / fw.sum;
        let b = model.bias_offset(r);
        out[b] += e * fbar;
        for m in 0..m_count {
            out[b + 1 + m] += e * fbar * x[m];
        }

        let dl_df = e * (fw.outputs[r] - fw.prediction) / fw.sum;
        match model.mf_type() {
            MfType::Gaussian => {
                for (m, mf) in rule.antecedents.iter().enumerate() {
                    let MembershipFunction::Gaussian(g) = mf else { unreachable!() };
                    let diff = x[m] - g.center();
                    let s2 = g.spread() * g.spread();
                    let coef = dl_df * f;
                    out[base + m * p] += coef * diff / s2;
                    out[base + m * p + 1] += coef * diff * diff / (s2 * g.spread());
                }
            }
            MfType::Trapezoid => {
                for (m, mf) in rule.antecedents.iter().enumerate() {
                    grades[m] = mf.grade(x[m]);
                    prefix[m + 1] = prefix[m] * grades[m];
                }
                // product of the other grades, right to left
                let mut suffix = 1.0;
                for m in (0..m_count).rev() {
                    let others = prefix[m] * suffix;
                    suffix *= grades[m];
                    let MembershipFunction::Trapezoid(t) = rule.antecedents[m] else { unreachable!() };
                    let (a, bb, c, d) = (t.a(), t.b(), t.c(), t.d());
                    let xm = x[m];
                    let mu = grades[m];
                    let k = dl_df * others;
                    let slot = base + m * p;
                    if xm > a && xm < bb {
                        let w = bb - a;
                        if mu > FIRING_EPS {
                            out[slot] += k * (xm - bb) / (w * w);
                        }
                        out[slot + 1] += k * -(xm - a) / (w * w);
                    } else if xm > c && xm < d {
                        let w = d - c;
                        out[slot + 2] += k * (d - xm) / (w * w);
                        if mu > FIRING_EPS {
                            out[slot + 3] += k * (xm - c) / (w * w);
                        }
                    }
                }
            }
        }
    }
    e * e
}

/// Batch gradient and the masked batch loss.
/// Samples per accumulation chunk in [`batch_gradient`].
const GRADIENT_CHUNK: usize = 32;

pub(crate) fn batch_gradient(
    model: &TskModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    masks: Option<&BatchMasks>,
    lambda: f64,
    exec: Execution,
) -> Result<(GradientVector, f64)> {
    check_batch(model, x, y, masks)?;
    let x = x.as_standard_layout();
    let x = x.view();
    let len = model.num_params();
    // fixed chunks, each accumulated in order, then reduced in order, so the
    // result does not depend on the execution strategy
    let chunks = x.nrows().div_ceil(GRADIENT_CHUNK);
    let parts = exec.map(chunks, |c| {
        let mut buf = vec![0.0; len];
        let mut sse = 0.0;
        for n in c * GRADIENT_CHUNK..((c + 1) * GRADIENT_CHUNK).min(x.nrows()) {
            let row = x.row(n);
            sse += sample_gradient(
                model,
                row.as_slice().expect("standard layout"),
                y[n],
                masks.map(|m| m.row(n)),
                &mut buf,
            );
        }
        (buf, sse)
    });
    let mut grad = vec![0.0; len];
    let mut sse = 0.0;
    for (buf, se) in parts {
        for (g, b) in grad.iter_mut().zip(&buf) {
            *g += b;
        }
        sse += se;
    }

    if lambda != 0.0 {
        for r in 0..model.num_rules() {
            let b = model.bias_offset(r);
            for (m, w) in model.rules()[r].weights.iter().enumerate() {
                grad[b + 1 + m] += lambda * w;
            }
        }
    }
    let loss = 0.5 * sse + ridge_penalty(model, lambda);
    Ok((GradientVector(grad), loss))
}

fn require_family(model: &TskModel, family: MfType) -> Result<()> {
    if model.mf_type() != family {
        return Err(TskError::InvalidModel(format!(
            "expected a {family} model, got {}",
            model.mf_type()
        )));
    }
    Ok(())
}

/// Gradient of the masked loss for a Gaussian model.
pub fn gaussian_gradients(
    model: &TskModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    masks: Option<&BatchMasks>,
    lambda: f64,
) -> Result<GradientVector> {
    require_family(model, MfType::Gaussian)?;
    batch_gradient(model, x, y, masks, lambda, Execution::default()).map(|(g, _)| g)
}

/// Gradient of the masked loss for a trapezoidal model. Samples on a plateau
/// or outside the support contribute nothing to that function's shape.
pub fn trapezoid_gradients(
    model: &TskModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    masks: Option<&BatchMasks>,
    lambda: f64,
) -> Result<GradientVector> {
    require_family(model, MfType::Trapezoid)?;
    batch_gradient(model, x, y, masks, lambda, Execution::default()).map(|(g, _)| g)
}

/// Dispatches on the model's family with an explicit execution strategy.
pub fn gradients(
    model: &TskModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    masks: Option<&BatchMasks>,
    lambda: f64,
    exec: Execution,
) -> Result<GradientVector> {
    batch_gradient(model, x, y, masks, lambda, exec).map(|(g, _)| g)
}

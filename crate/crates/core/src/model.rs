//! TSK rules and models: firing levels, normalization and system output.

use ndarray::ArrayView2;

use crate::error::{Result, TskError};
use crate::exec::Execution;
use crate::membership::{MembershipFunction, MfType};

/// Raw firing sums at or below this value trigger the uniform fallback.
pub const FIRING_EPS: f64 = 1e-12;

/// One IF-THEN rule with a first-order (affine) consequent.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub antecedents: Vec<MembershipFunction>,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn new(antecedents: Vec<MembershipFunction>, bias: f64, weights: Vec<f64>) -> Result<Self> {
        if antecedents.len() != weights.len() {
            return Err(TskError::DimensionMismatch {
                expected: antecedents.len(),
                got: weights.len(),
            });
        }
        if antecedents.is_empty() {
            return Err(TskError::InvalidModel("a rule needs at least one antecedent".into()));
        }
        Ok(Self {
            antecedents,
            bias,
            weights,
        })
    }

    pub fn num_features(&self) -> usize {
        self.antecedents.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.antecedents.len() {
            return Err(TskError::DimensionMismatch {
                expected: self.antecedents.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Product of the per-feature membership grades.
    pub fn firing_level(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.firing_level_unchecked(x))
    }

    pub(crate) fn firing_level_unchecked(&self, x: &[f64]) -> f64 {
        let f: f64 = self
            .antecedents
            .iter()
            .zip(x)
            .map(|(mf, &xm)| mf.grade(xm))
            .product();
        f.max(0.0)
    }

    /// `bias + weights . x`
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.output_unchecked(x))
    }

    pub(crate) fn output_unchecked(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, xm)| w * xm).sum::<f64>()
    }
}

/// Membership grade of `x` on `mf`.
pub fn membership(mf: &MembershipFunction, x: f64) -> f64 {
    mf.grade(x)
}

pub fn firing_level(rule: &Rule, x: &[f64]) -> Result<f64> {
    rule.firing_level(x)
}

pub fn rule_output(rule: &Rule, x: &[f64]) -> Result<f64> {
    rule.output(x)
}

/// Normalizes raw firing levels. A sum at or below [`FIRING_EPS`] yields the
/// uniform vector `1/R`.
pub fn normalize_firing(firing: &[f64]) -> Vec<f64> {
    let sum: f64 = firing.iter().sum();
    if sum > FIRING_EPS {
        firing.iter().map(|f| f / sum).collect()
    } else {
        vec![1.0 / firing.len() as f64; firing.len()]
    }
}

/// An ordered rule base over `M` features. All membership functions share
/// one shape family.
#[derive(Debug, Clone, PartialEq)]
pub struct TskModel {
    rules: Vec<Rule>,
    num_features: usize,
    mf_type: MfType,
}

impl TskModel {
    pub fn new(rules: Vec<Rule>) -> Result<Self> {
        let first = rules
            .first()
            .ok_or_else(|| TskError::InvalidModel("a model needs at least one rule".into()))?;
        let num_features = first.num_features();
        let mf_type = first.antecedents[0].mf_type();
        for rule in &rules {
            if rule.num_features() != num_features || rule.weights.len() != num_features {
                return Err(TskError::DimensionMismatch {
                    expected: num_features,
                    got: rule.num_features(),
                });
            }
            if rule.antecedents.iter().any(|mf| mf.mf_type() != mf_type) {
                return Err(TskError::InvalidModel(
                    "all membership functions must share one shape family".into(),
                ));
            }
            if !rule.bias.is_finite() || rule.weights.iter().any(|w| !w.is_finite()) {
                return Err(TskError::InvalidModel("non-finite consequent coefficient".into()));
            }
        }
        Ok(Self {
            rules,
            num_features,
            mf_type,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn num_rules(&self) -> usize {
        self.rules.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn mf_type(&self) -> MfType {
        self.mf_type
    }

    pub fn into_rules(self) -> Vec<Rule> {
        self.rules
    }

    pub(crate) fn rules_mut(&mut self) -> &mut [Rule] {
        &mut self.rules
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(TskError::DimensionMismatch {
                expected: self.num_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn check_firing(&self, firing: &[f64]) -> Result<()> {
        if firing.len() != self.rules.len() {
            return Err(TskError::DimensionMismatch {
                expected: self.rules.len(),
                got: firing.len(),
            });
        }
        if firing.iter().any(|f| !(*f >= 0.0)) {
            return Err(TskError::InvalidParameter(
                "firing levels must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Raw firing level of every rule.
    pub fn firing_levels(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.firing_levels_unchecked(x))
    }

    pub(crate) fn firing_levels_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.rules.iter().map(|r| r.firing_level_unchecked(x)).collect()
    }

    /// Normalized firing levels. `firing` overrides the computed raw levels,
    /// e.g. after DropRule masking.
    pub fn normalized_firing_levels(&self, x: &[f64], firing: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        match firing {
            Some(f) => {
                self.check_firing(f)?;
                Ok(normalize_firing(f))
            }
            None => Ok(normalize_firing(&self.firing_levels_unchecked(x))),
        }
    }

    pub fn rule_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.rules.iter().map(|r| r.output_unchecked(x)).collect())
    }

    /// System output: firing-weighted mean of the rule consequents, or the
    /// plain mean when the raw firing sum is degenerate.
    pub fn predict(&self, x: &[f64], firing: Option<&[f64]>) -> Result<f64> {
        self.check_input(x)?;
        match firing {
            Some(f) => {
                self.check_firing(f)?;
                Ok(self.combine(x, f))
            }
            None => Ok(self.predict_unchecked(x)),
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let firing = self.firing_levels_unchecked(x);
        self.combine(x, &firing)
    }

    fn combine(&self, x: &[f64], firing: &[f64]) -> f64 {
        let sum: f64 = firing.iter().sum();
        if sum > FIRING_EPS {
            self.rules
                .iter()
                .zip(firing)
                .map(|(r, f)| f * r.output_unchecked(x))
                .sum::<f64>()
                / sum
        } else {
            self.rules.iter().map(|r| r.output_unchecked(x)).sum::<f64>() / self.rules.len() as f64
        }
    }

    /// Predicts every row of `x`.
    pub fn predict_many(&self, x: ArrayView2<'_, f64>, exec: Execution) -> Result<Vec<f64>> {
        if x.ncols() != self.num_features {
            return Err(TskError::DimensionMismatch {
                expected: self.num_features,
                got: x.ncols(),
            });
        }
        let x = x.as_standard_layout();
        let x = x.view();
        Ok(exec.map(x.nrows(), |n| {
            let row = x.row(n);
            self.predict_unchecked(row.as_slice().expect("standard layout"))
        }))
    }

    /// Test-set RMSE of the model on `(x, y)`.
    pub fn rmse_on(&self, x: ArrayView2<'_, f64>, y: &[f64], exec: Execution) -> Result<f64> {
        let pred = self.predict_many(x, exec)?;
        rmse(&pred, y)
    }

    // Flattened parameter vector. Per rule: the shape parameters of each
    // antecedent in feature order, then the bias, then the M weights.

    pub fn rule_stride(&self) -> usize {
        self.num_features * self.mf_type.num_params() + 1 + self.num_features
    }

    pub fn num_params(&self) -> usize {
        self.rule_stride() * self.rules.len()
    }

    /// Offset of rule `r`'s bias in the flattened parameter vector.
    pub fn bias_offset(&self, r: usize) -> usize {
        r * self.rule_stride() + self.num_features * self.mf_type.num_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let p = self.mf_type.num_params();
        let mut out = vec![0.0; self.num_params()];
        for (r, rule) in self.rules.iter().enumerate() {
            let base = r * self.rule_stride();
            for (m, mf) in rule.antecedents.iter().enumerate() {
                mf.write_params(&mut out[base + m * p..base + (m + 1) * p]);
            }
            let b = self.bias_offset(r);
            out[b] = rule.bias;
            out[b + 1..b + 1 + self.num_features].copy_from_slice(&rule.weights);
        }
        out
    }

    /// Replaces all parameters, validating every membership function.
    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.num_params() {
            return Err(TskError::DimensionMismatch {
                expected: self.num_params(),
                got: theta.len(),
            });
        }
        let p = self.mf_type.num_params();
        let rules = self
            .rules
            .iter()
            .enumerate()
            .map(|(r, rule)| {
                let base = r * self.rule_stride();
                let antecedents = rule
                    .antecedents
                    .iter()
                    .enumerate()
                    .map(|(m, mf)| mf.with_params(&theta[base + m * p..base + (m + 1) * p]))
                    .collect::<Result<Vec<_>>>()?;
                let b = self.bias_offset(r);
                Rule::new(antecedents, theta[b], theta[b + 1..b + 1 + self.num_features].to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rules)
    }

    pub(crate) fn set_params_unchecked(&mut self, theta: &[f64]) {
        let p = self.mf_type.num_params();
        let stride = self.rule_stride();
        let m_count = self.num_features;
        for (r, rule) in self.rules.iter_mut().enumerate() {
            let base = r * stride;
            for (m, mf) in rule.antecedents.iter_mut().enumerate() {
                mf.set_params_unchecked(&theta[base + m * p..base + (m + 1) * p]);
            }
            let b = base + m_count * p;
            rule.bias = theta[b];
            rule.weights.copy_from_slice(&theta[b + 1..b + 1 + m_count]);
        }
    }

    /// Removes and returns rule `index`.
    pub fn remove_rule(&mut self, index: usize) -> Result<Rule> {
        if index >= self.rules.len() {
            return Err(TskError::IndexOutOfRange {
                index,
                len: self.rules.len(),
            });
        }
        if self.rules.len() == 1 {
            return Err(TskError::InvalidModel("cannot remove the last rule".into()));
        }
        Ok(self.rules.remove(index))
    }

    /// Keeps only the rules whose indices are listed, in the given order.
    pub fn retain_indices(&self, keep: &[usize]) -> Result<Self> {
        let rules = keep
            .iter()
            .map(|&i| {
                self.rules.get(i).cloned().ok_or(TskError::IndexOutOfRange {
                    index: i,
                    len: self.rules.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rules)
    }
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(TskError::EmptyInput("rmse needs at least one sample"));
    }
    if predictions.len() != targets.len() {
        return Err(TskError::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

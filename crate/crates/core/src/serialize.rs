//! JSON model documents.
//!
//! ```json
//! {"mf_type": "gaussian", "num_features": 2,
//!  "rules": [{"antecedents": [{"center": 0.0, "spread": 1.0}, ...],
//!             "bias": 0.5, "weights": [0.1, -0.2]}]}
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};
use crate::membership::{MembershipFunction, MfType};
use crate::model::{Rule, TskModel};

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum AntecedentDoc {
    Gaussian { center: f64, spread: f64 },
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleDoc {
    antecedents: Vec<AntecedentDoc>,
    bias: f64,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    mf_type: MfType,
    num_features: usize,
    rules: Vec<RuleDoc>,
}

impl From<&TskModel> for ModelDoc {
    fn from(model: &TskModel) -> Self {
        let rules = model
            .rules()
            .iter()
            .map(|rule| RuleDoc {
                antecedents: rule
                    .antecedents
                    .iter()
                    .map(|mf| match mf {
                        MembershipFunction::Gaussian(g) => AntecedentDoc::Gaussian {
                            center: g.center(),
                            spread: g.spread(),
                        },
                        MembershipFunction::Trapezoid(t) => AntecedentDoc::Trapezoid {
                            a: t.a(),
                            b: t.b(),
                            c: t.c(),
                            d: t.d(),
                        },
                    })
                    .collect(),
                bias: rule.bias,
                weights: rule.weights.clone(),
            })
            .collect();
        ModelDoc {
            mf_type: model.mf_type(),
            num_features: model.num_features(),
            rules,
        }
    }
}

impl TryFrom<ModelDoc> for TskModel {
    type Error = TskError;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        let rules = doc
            .rules
            .into_iter()
            .map(|rd| {
                let antecedents = rd
                    .antecedents
                    .into_iter()
                    .map(|ad| match (doc.mf_type, ad) {
                        (MfType::Gaussian, AntecedentDoc::Gaussian { center, spread }) => {
                            MembershipFunction::gaussian(center, spread)
                        }
                        (MfType::Trapezoid, AntecedentDoc::Trapezoid { a, b, c, d }) => {
                            MembershipFunction::trapezoid(a, b, c, d)
                        }
                        (expected, _) => Err(TskError::InvalidModel(format!(
                            "antecedent does not match mf_type `{expected}`"
                        ))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Rule::new(antecedents, rd.bias, rd.weights)
            })
            .collect::<Result<Vec<_>>>()?;
        let model = TskModel::new(rules)?;
        if model.num_features() != doc.num_features {
            return Err(TskError::DimensionMismatch {
                expected: doc.num_features,
                got: model.num_features(),
            });
        }
        Ok(model)
    }
}

impl TskModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(s)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

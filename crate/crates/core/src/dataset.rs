//! CSV ingestion, z-normalization and train/test splitting.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
}

/// Where the target lives in each CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetColumn {
    #[default]
    Last,
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    pub target: TargetColumn,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            target: TargetColumn::Last,
        }
    }
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Vec<f64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(TskError::DimensionMismatch {
                expected: features.nrows(),
                got: targets.len(),
            });
        }
        let feature_names =
            feature_names.unwrap_or_else(|| (0..features.ncols()).map(|j| format!("x{}", j + 1)).collect());
        if feature_names.len() != features.ncols() {
            return Err(TskError::DimensionMismatch {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        Ok(Self {
            features,
            targets,
            feature_names,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn load_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, options)
    }

    /// Parses comma-separated numeric rows. Error rows and columns are 1-based
    /// and count the header line when present.
    pub fn read_csv<R: std::io::Read>(reader: R, options: CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;

        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let line = i + 1;
            if record.iter().all(|c| c.is_empty()) {
                continue;
            }
            if options.has_header && header.is_none() && rows.is_empty() {
                header = Some(record.iter().map(str::to_owned).collect());
                width = Some(record.len());
                continue;
            }
            match width {
                Some(w) if w != record.len() => {
                    return Err(TskError::Load {
                        row: line,
                        column: record.len().min(w) + 1,
                        message: format!("expected {w} fields, found {}", record.len()),
                    });
                }
                None => width = Some(record.len()),
                _ => {}
            }
            let values = record
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    cell.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| TskError::Load {
                            row: line,
                            column: j + 1,
                            message: format!("non-numeric value `{cell}`"),
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(values);
        }

        let width = width.unwrap_or(0);
        if rows.is_empty() {
            return Err(TskError::EmptyInput("csv contains no data rows"));
        }
        if width < 2 {
            return Err(TskError::Load {
                row: 1,
                column: 1,
                message: "need at least one feature column and a target column".into(),
            });
        }
        let target = match options.target {
            TargetColumn::Last => width - 1,
            TargetColumn::Index(t) if t < width => t,
            TargetColumn::Index(t) => {
                return Err(TskError::InvalidConfig(format!(
                    "target column {t} out of range for {width} columns"
                )))
            }
        };
        let feature_cols: Vec<usize> = (0..width).filter(|&j| j != target).collect();
        let n = rows.len();
        let features = Array2::from_shape_fn((n, feature_cols.len()), |(i, j)| rows[i][feature_cols[j]]);
        let targets = rows.iter().map(|r| r[target]).collect();
        let names = header.map(|h| feature_cols.iter().map(|&j| h[j].clone()).collect());
        Self::new(features, targets, names)
    }
}

/// Training-set statistics used to standardize features and center targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingParams {
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub target_mean: f64,
    /// Indices of the original feature columns that were kept.
    pub kept_columns: Vec<usize>,
}

/// Z-normalizes each feature (population std) and subtracts the target mean.
/// A constant feature is an error unless `drop_constant` is set, in which
/// case the column is removed.
pub fn fit_transform(train: &Dataset, drop_constant: bool) -> Result<(Dataset, PreprocessingParams)> {
    let n = train.num_samples();
    if n == 0 {
        return Err(TskError::EmptyInput("training set is empty"));
    }
    let mut means = Vec::new();
    let mut stds = Vec::new();
    let mut kept = Vec::new();
    for (j, col) in train.features.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            if drop_constant {
                continue;
            }
            return Err(TskError::ZeroVariance {
                column: j,
                name: train.feature_names[j].clone(),
            });
        }
        means.push(mean);
        stds.push(std);
        kept.push(j);
    }
    if kept.is_empty() {
        return Err(TskError::EmptyInput("every feature column is constant"));
    }
    let target_mean = train.targets.iter().sum::<f64>() / n as f64;
    let params = PreprocessingParams {
        feature_means: means,
        feature_stds: stds,
        target_mean,
        kept_columns: kept,
    };
    let out = apply(&params, train)?;
    Ok((out, params))
}

/// Transforms `data` with previously fitted statistics.
pub fn apply(params: &PreprocessingParams, data: &Dataset) -> Result<Dataset> {
    if let Some(&max) = params.kept_columns.iter().max() {
        if max >= data.num_features() {
            return Err(TskError::DimensionMismatch {
                expected: max + 1,
                got: data.num_features(),
            });
        }
    }
    let cols = &params.kept_columns;
    let features = Array2::from_shape_fn((data.num_samples(), cols.len()), |(i, j)| {
        (data.features[[i, cols[j]]] - params.feature_means[j]) / params.feature_stds[j]
    });
    Dataset::new(
        features,
        data.targets.iter().map(|t| t - params.target_mean).collect(),
        Some(cols.iter().map(|&j| data.feature_names[j].clone()).collect()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Random partition of `0..n` with `round(fraction * n)` training indices.
pub fn split(n: usize, spec: SplitSpec) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    split_with_rng(n, spec.train_fraction, &mut rng)
}

pub fn split_with_rng<R: Rng + ?Sized>(n: usize, train_fraction: f64, rng: &mut R) -> Result<Split> {
    if n < 2 {
        return Err(TskError::InsufficientData { samples: n, clusters: 2 });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TskError::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(n_train);
    Ok(Split { train: idx, test })
}

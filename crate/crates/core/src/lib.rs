//! Takagi-Sugeno-Kang fuzzy regression.
//!
//! * [`model`]: rule bases with Gaussian or trapezoidal antecedents and
//!   first-order consequents.
//! * [`init`]: fuzzy c-means / k-means rule initialization.
//! * [`trainer`]: mini-batch gradient descent with ridge regularization,
//!   DropRule and AdaBound.
//! * [`pruner`]: firing-strength filtering and Jaccard-similarity merging
//!   interleaved with refinement.
//! * [`dataset`]: CSV loading, z-normalization and splits.
//!
//! The inner loops (per-sample gradients, batch prediction, clustering
//! assignments, firing matrices) run on rayon when the `parallel` feature is
//! enabled. Results are bit-identical to sequential execution.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod error;
pub mod exec;
pub mod init;
pub mod membership;
pub mod model;
pub mod pruner;
mod serialize;
pub mod trainer;

pub use dataset::{CsvOptions, Dataset, PreprocessingParams, Split, SplitSpec, TargetColumn};
pub use error::{Result, TskError};
pub use exec::Execution;
pub use membership::{GaussianMf, MembershipFunction, MfType, TrapezoidMf};
pub use model::{Rule, TskModel, FIRING_EPS};
pub use pruner::{PruneConfig, PruneHistory, Pruned};
pub use trainer::{EpochLog, TrainConfig, Trained};

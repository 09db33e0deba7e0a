use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tsk_core::dataset::{apply, fit_transform, split_with_rng};
use tsk_core::pruner::{prune_and_refine_with_rng, write_prune_csv};
use tsk_core::trainer::{train_with_rng, write_epoch_csv};
use tsk_core::{CsvOptions, Dataset, EpochLog, MfType, PreprocessingParams, PruneConfig, TrainConfig, TskModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Prune,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub csv: CsvOptions,
    pub drop_constant: bool,
    pub mode: Mode,
    pub mf_type: MfType,
    pub rules: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub droprule_rate: f64,
    pub gamma: f64,
    pub theta: f64,
    pub prune_iterations: usize,
    pub repeats: usize,
    pub base_seed: u64,
    pub train_fraction: f64,
    pub out: PathBuf,
}

impl ExperimentConfig {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            num_rules: self.rules,
            epochs: self.epochs,
            batch_size: self.batch_size,
            droprule_rate: self.droprule_rate,
            learning_rate: self.learning_rate,
            l2_lambda: self.l2_lambda,
            seed,
            mf_type: self.mf_type,
            ..Default::default()
        }
    }

    fn prune_config(&self, seed: u64) -> PruneConfig {
        PruneConfig {
            initial_rules: self.rules,
            total_epochs: self.epochs,
            firing_threshold: self.gamma,
            similarity_threshold: self.theta,
            prune_iterations: self.prune_iterations,
            train: self.train_config(seed),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            bail!("--repeats must be at least 1");
        }
        match self.mode {
            Mode::Train => self.train_config(self.base_seed).validate()?,
            Mode::Prune => self.prune_config(self.base_seed).validate()?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    pub test_rmse: f64,
    pub final_rules: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub mf_type: MfType,
    pub repeats: usize,
    pub base_seed: u64,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub mean_final_rules: f64,
    pub per_run: Vec<RunRecord>,
}

struct RunOutput {
    record: RunRecord,
    model: TskModel,
    preprocessing: PreprocessingParams,
    log: Vec<EpochLog>,
    prune_history: Option<Vec<tsk_core::PruneHistory>>,
}

/// Split, standardize with training statistics, and return `(train, test, params)`.
pub fn prepare(
    data: &Dataset,
    train_fraction: f64,
    drop_constant: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, Dataset, PreprocessingParams)> {
    let split = split_with_rng(data.num_samples(), train_fraction, rng).context("splitting dataset")?;
    let (train, params) =
        fit_transform(&data.subset(&split.train), drop_constant).context("preprocessing training split")?;
    let test = apply(&params, &data.subset(&split.test)).context("preprocessing test split")?;
    Ok((train, test, params))
}

fn run_one(cfg: &ExperimentConfig, data: &Dataset, repeat: usize) -> Result<RunOutput> {
    let seed = cfg.base_seed + repeat as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, test, preprocessing) = prepare(data, cfg.train_fraction, cfg.drop_constant, &mut rng)?;
    let (xt, yt) = (train.features.view(), &train.targets[..]);
    let (xs, ys) = (test.features.view(), &test.targets[..]);

    let (model, log, prune_history) = match cfg.mode {
        Mode::Train => {
            let trained = train_with_rng(xt, yt, xs, ys, &cfg.train_config(seed), None, &mut rng, |_| {})
                .with_context(|| format!("training (seed {seed})"))?;
            (trained.model, trained.log, None)
        }
        Mode::Prune => {
            let pruned = prune_and_refine_with_rng(xt, yt, xs, ys, &cfg.prune_config(seed), &mut rng)
                .with_context(|| format!("pruning (seed {seed})"))?;
            (pruned.model, pruned.log, Some(pruned.history))
        }
    };
    let test_rmse = model.rmse_on(xs, ys, Default::default()).context("evaluating final model")?;
    Ok(RunOutput {
        record: RunRecord {
            repeat,
            seed,
            test_rmse,
            final_rules: model.num_rules(),
        },
        model,
        preprocessing,
        log,
        prune_history,
    })
}

fn thread_limit() -> Option<usize> {
    std::env::var("TSK_THREADS").ok()?.parse().ok().filter(|&n| n > 0)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Summary> {
    cfg.validate().context("validating configuration")?;
    let data = Dataset::load_csv(&cfg.data, cfg.csv)
        .with_context(|| format!("loading dataset {}", cfg.data.display()))?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building thread pool")?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|r| run_one(cfg, &data, r))
            .collect::<Result<Vec<_>>>()
    })?;

    for o in &outputs {
        write_run_files(&cfg.out, o).context("writing per-run outputs")?;
    }
    let rmses: Vec<f64> = outputs.iter().map(|o| o.record.test_rmse).collect();
    let (mean_rmse, std_rmse) = mean_std(&rmses);
    let mean_final_rules =
        outputs.iter().map(|o| o.record.final_rules as f64).sum::<f64>() / outputs.len() as f64;
    let summary = Summary {
        mode: cfg.mode,
        mf_type: cfg.mf_type,
        repeats: cfg.repeats,
        base_seed: cfg.base_seed,
        mean_rmse,
        std_rmse,
        mean_final_rules,
        per_run: outputs.into_iter().map(|o| o.record).collect(),
    };
    let path = cfg.out.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

pub fn run_prefix(seed: u64) -> String {
    format!("run_seed{seed}")
}

fn write_run_files(out: &Path, o: &RunOutput) -> Result<()> {
    let prefix = out.join(run_prefix(o.record.seed));
    let with = |suffix: &str| PathBuf::from(format!("{}_{suffix}", prefix.display()));

    write_epoch_csv(BufWriter::new(File::create(with("epochs.csv"))?), &o.log)?;
    if let Some(h) = &o.prune_history {
        write_prune_csv(BufWriter::new(File::create(with("prune.csv"))?), h)?;
    }
    o.model.save(with("model.json"))?;
    std::fs::write(with("preprocessing.json"), serde_json::to_string_pretty(&o.preprocessing)?)?;
    Ok(())
}

pub struct EvaluateArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub csv: CsvOptions,
    pub drop_constant: bool,
    pub seed: u64,
    pub train_fraction: f64,
    pub preprocessing: Option<PathBuf>,
}

/// Test RMSE of a saved model on the split that `run` used for `seed`.
pub fn evaluate(args: &EvaluateArgs) -> Result<f64> {
    let model = TskModel::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let data = Dataset::load_csv(&args.data, args.csv)
        .with_context(|| format!("loading dataset {}", args.data.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (_, test, fitted) = prepare(&data, args.train_fraction, args.drop_constant, &mut rng)?;
    let test = match &args.preprocessing {
        Some(p) => {
            let params: PreprocessingParams = serde_json::from_str(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )?;
            if params != fitted {
                eprintln!("warning: recorded preprocessing differs from the refitted split statistics");
            }
            let split = split_with_rng(data.num_samples(), args.train_fraction, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
            apply(&params, &data.subset(&split.test))?
        }
        None => test,
    };
    if test.num_features() != model.num_features() {
        bail!(
            "model expects {} features but the preprocessed dataset has {}",
            model.num_features(),
            test.num_features()
        );
    }
    Ok(model.rmse_on(test.features.view(), &test.targets, Default::default())?)
}

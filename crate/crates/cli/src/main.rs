mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use experiment::{EvaluateArgs, ExperimentConfig, Mode};
use tsk_core::{CsvOptions, MfType, TargetColumn};

#[derive(Parser)]
#[command(name = "tsk", version, about = "Train and prune TSK fuzzy regression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MfArg {
    Gaussian,
    Trapezoid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Prune,
}

#[derive(Clone, Copy, ValueEnum)]
enum YesNo {
    Yes,
    No,
}

#[derive(clap::Args)]
struct DataArgs {
    /// CSV file; the target is the last column unless --target-col is given.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "yes")]
    header: YesNo,
    /// Zero-based target column index.
    #[arg(long)]
    target_col: Option<usize>,
    /// Drop constant feature columns instead of failing.
    #[arg(long)]
    drop_constant: bool,
    #[arg(long, default_value_t = 0.7)]
    split: f64,
}

impl DataArgs {
    fn csv(&self) -> CsvOptions {
        CsvOptions {
            has_header: matches!(self.header, YesNo::Yes),
            target: self.target_col.map_or(TargetColumn::Last, TargetColumn::Index),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated train or prune experiments and write logs plus a JSON summary.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "gaussian")]
        mf: MfArg,
        #[arg(long, value_enum, default_value = "train")]
        mode: ModeArg,
        /// Number of rules (initial rule count when pruning).
        #[arg(long, default_value_t = 32)]
        rules: usize,
        /// Training epochs (total across phases when pruning).
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        /// Probability of keeping each rule per training sample.
        #[arg(long, default_value_t = 0.5)]
        droprule: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 3)]
        prune_iters: usize,
        #[arg(long, default_value_t = 30)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "tsk-out")]
        out: PathBuf,
    },
    /// Print the test RMSE of a saved model on the split used for a given seed.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Preprocessing statistics written by `run`; refitted from the split when absent.
        #[arg(long)]
        preprocessing: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            data,
            mf,
            mode,
            rules,
            epochs,
            batch_size,
            lr,
            lambda,
            droprule,
            gamma,
            theta,
            prune_iters,
            repeats,
            seed,
            out,
        } => {
            let cfg = ExperimentConfig {
                csv: data.csv(),
                data: data.data,
                drop_constant: data.drop_constant,
                mode: match mode {
                    ModeArg::Train => Mode::Train,
                    ModeArg::Prune => Mode::Prune,
                },
                mf_type: match mf {
                    MfArg::Gaussian => MfType::Gaussian,
                    MfArg::Trapezoid => MfType::Trapezoid,
                },
                rules,
                epochs,
                batch_size,
                learning_rate: lr,
                l2_lambda: lambda,
                droprule_rate: droprule,
                gamma,
                theta,
                prune_iterations: prune_iters,
                repeats,
                base_seed: seed,
                train_fraction: data.split,
                out,
            };
            experiment::run(&cfg).map(|s| {
                println!(
                    "mean_rmse={:.6} std_rmse={:.6} mean_final_rules={:.2} ({} runs, summary in {})",
                    s.mean_rmse,
                    s.std_rmse,
                    s.mean_final_rules,
                    s.repeats,
                    cfg.out.join("summary.json").display()
                );
            })
        }
        Command::Evaluate {
            model,
            data,
            seed,
            preprocessing,
        } => experiment::evaluate(&EvaluateArgs {
            model,
            csv: data.csv(),
            data: data.data,
            drop_constant: data.drop_constant,
            seed,
            train_fraction: data.split,
            preprocessing,
        })
        .map(|rmse| println!("{rmse}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

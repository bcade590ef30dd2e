use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsr_cli::commands::{
    cmd_bench, cmd_check, cmd_eval, cmd_features, cmd_synth, cmd_train, cmd_tune,
};
use tsr_cli::synth::SynthConfig;
use tsr_cli::CliError;
use tsr_core::svm::TrainConfig;

#[derive(Parser)]
#[command(
    name = "tsr",
    version,
    about = "HOG + SVM traffic-sign recognition benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarise a dataset root: per-class counts, imbalance, image sizes.
    Check {
        #[arg(long)]
        data_root: PathBuf,
    },
    /// Extract features for one pipeline into <out>.train, <out>.val and <out>.test.
    Features {
        #[arg(long)]
        data_root: PathBuf,
        #[arg(long)]
        pipeline: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        roi_crop: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a one-vs-one model on a feature cache.
    Train {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value_t = TrainConfig::default().c)]
        c: f64,
        #[arg(long, default_value_t = TrainConfig::default().gamma)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on a feature cache.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all seven pipelines and write the validation and test tables.
    Bench {
        #[arg(long)]
        data_root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        roi_crop: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-stage randomized search for C and gamma.
    Tune {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a small synthetic dataset in the same directory layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        classes: u32,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 6)]
        test_per_class: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let out = &mut stdout.lock();
    match cli.command {
        Command::Check { data_root } => cmd_check(&data_root, out).map(drop),
        Command::Features {
            data_root,
            pipeline,
            seed,
            roi_crop,
            out: prefix,
        } => cmd_features(&data_root, &pipeline, seed, roi_crop, &prefix, out).map(drop),
        Command::Train {
            cache,
            c,
            gamma,
            out: model,
        } => cmd_train(&cache, &TrainConfig::new(c, gamma), &model, out).map(drop),
        Command::Eval {
            model,
            cache,
            format,
            out: report,
        } => cmd_eval(&model, &cache, &format, report.as_deref(), out).map(drop),
        Command::Bench {
            data_root,
            seed,
            roi_crop,
            out: dir,
        } => cmd_bench(&data_root, seed, roi_crop, &dir, out).map(drop),
        Command::Tune {
            cache,
            seed,
            out: config,
        } => cmd_tune(&cache, seed, config.as_deref(), out).map(drop),
        Command::Synth {
            out: dir,
            classes,
            per_class,
            test_per_class,
            seed,
        } => {
            let cfg = SynthConfig {
                classes,
                train_per_class: per_class,
                test_per_class,
                seed,
            };
            cmd_synth(&dir, &cfg, out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Command-line driver for the waveform-selection pipeline.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use wavesel_core::config::{PipelineConfig, SeedStream};
use wavesel_core::dataset::{split_stratified, LabeledDataset, SplitSpec};
use wavesel_core::features::{FeatureVector, NUM_FEATURES};
use wavesel_core::ml::{train, ModelKind, TrainedModel};
use wavesel_core::pipeline::{self, with_suffix, with_workers};
use wavesel_core::scenario::{read_raw_csv, write_raw_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wavesel", version, about = "Multi-numerology waveform selection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate cell scenarios into a raw per-user CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract features, label every scenario and balance the classes.
    Label {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stratified train/validation/test split into `<prefix>_{train,val,test}.csv`.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
        /// Split fractions and seed; without it the dataset's recorded master seed is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit one classifier, choosing hyperparameters on the validation set.
    Train {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hyperparameter grid; without it the defaults and the dataset's master seed apply.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Confusion matrix, ROC curves and summary for a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
        /// Supplies the class grouping; the default grouping applies without it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Classify one feature vector.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Seven comma-separated feature values.
        #[arg(long, allow_hyphen_values = true)]
        features: String,
    },
    /// Print every config key with its default value.
    Defaults,
    /// Every stage in one process, writing all artifacts into a directory.
    RunAll {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn optional_config(path: Option<&Path>) -> Result<Option<PipelineConfig>> {
    path.map(load_config).transpose()
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn recorded_seed(ds: &LabeledDataset) -> u64 {
    ds.provenance
        .map_or(PipelineConfig::default().scenario.master_seed, |p| p.master_seed)
}

fn parse_features(text: &str) -> Result<FeatureVector> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing features {text:?}"))?;
    let Ok(arr) = <[f64; NUM_FEATURES]>::try_from(values.as_slice()) else {
        bail!("expected {NUM_FEATURES} features, got {}", values.len());
    };
    if arr.iter().any(|v| !v.is_finite()) {
        bail!("features must be finite");
    }
    Ok(FeatureVector(arr))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate { config, out } => {
            let cfg = load_config(&config)?;
            let scenarios = with_workers(cfg.workers, || pipeline::generate(&cfg))??;
            write_raw_csv(&scenarios, &out)?;
            println!("wrote {} scenarios to {}", scenarios.len(), out.display());
        }
        Command::Label { config, input, out } => {
            let cfg = load_config(&config)?;
            let scenarios = read_raw_csv(&input)?;
            let outcome = with_workers(cfg.workers, || pipeline::label_and_balance(&cfg, &scenarios))??;
            outcome.dataset.write_csv(&out)?;
            println!(
                "pre-balance counts {:?}; wrote {} balanced rows to {}",
                outcome.raw_counts,
                outcome.dataset.len(),
                out.display()
            );
        }
        Command::Split {
            input,
            out_prefix,
            config,
        } => {
            let ds = LabeledDataset::read_csv(&input)?;
            let spec = match optional_config(config.as_deref())? {
                Some(cfg) => cfg.split,
                None => SplitSpec {
                    seed: SeedStream::Split.derive(recorded_seed(&ds)),
                    ..SplitSpec::default()
                },
            };
            let (tr, va, te) = split_stratified(&ds, &spec)?;
            for (part, name) in [(&tr, "_train.csv"), (&va, "_val.csv"), (&te, "_test.csv")] {
                part.write_csv(&with_suffix(&out_prefix, name))?;
            }
            println!("split {} rows into {}/{}/{}", ds.len(), tr.len(), va.len(), te.len());
        }
        Command::Train {
            model,
            train: train_path,
            val,
            out,
            config,
        } => {
            let tr = LabeledDataset::read_csv(&train_path)?;
            let va = LabeledDataset::read_csv(&val)?;
            let cfg = match optional_config(config.as_deref())? {
                Some(cfg) => cfg,
                None => {
                    let mut cfg = PipelineConfig::default();
                    cfg.grid.mlp.seed = SeedStream::Mlp.derive(recorded_seed(&tr));
                    cfg
                }
            };
            let (trained, report) = with_workers(cfg.workers, || train(model, &tr, &va, &cfg.grid))??;
            trained.save(&out)?;
            println!(
                "{} {} val_accuracy={:.6} -> {}",
                report.kind,
                report.chosen,
                report.val_accuracy,
                out.display()
            );
        }
        Command::Evaluate {
            model,
            test,
            out_prefix,
            config,
        } => {
            let grouping = optional_config(config.as_deref())?.unwrap_or_default().grouping;
            let trained = TrainedModel::load(&model)?;
            let ds = LabeledDataset::read_csv(&test)?;
            let eval = pipeline::evaluate(&trained, trained.kind().name(), &ds, &grouping)?;
            pipeline::write_evaluation(&eval, &out_prefix)?;
            println!("{}", eval.summary.to_line());
        }
        Command::Predict { model, features } => {
            let trained = TrainedModel::load(&model)?;
            let x = parse_features(&features)?;
            let proba = trained.predict_proba(&x);
            let dist: Vec<String> = proba.iter().map(|p| format!("{p:.6}")).collect();
            println!("label={}", trained.predict(&x));
            println!("proba={}", dist.join(","));
        }
        Command::Defaults => print!("{}", PipelineConfig::default().to_text()),
        Command::RunAll { config, out_dir } => {
            let cfg = load_config(&config)?;
            let report = pipeline::run_to_dir(&cfg, &out_dir)?;
            for s in report.summaries() {
                println!("{}", s.to_line());
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
///
/// Returns 0 on success, 1 on a runtime failure and 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

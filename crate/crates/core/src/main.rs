use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use pnn_core::activation::ActivationKind;
use pnn_core::arch::{format_arch, parse_arch};
use pnn_core::checkpoint::load_checkpoint;
use pnn_core::data::{load_mnist, load_mnist_eval, IMAGE_PIXELS, NUM_CLASSES};
use pnn_core::experiment::{run_comparison, run_experiment, ExperimentSpec};
use pnn_core::metrics::{categorize, epoch_metrics, weight_balance, weight_snapshot};
use pnn_core::network::BiasMode;
use pnn_core::report::{metrics_columns, write_metrics_csv, write_taxonomy_json, write_weights_csv};
use pnn_core::selftest::run_selftest;
use pnn_core::train::{Method, TrainConfig};
use pnn_core::{PnnError, Result};

const DEFAULT_ARCH: &str = "784,48,35,10+784,50,10";

#[derive(Parser)]
#[command(name = "pnn", version, about = "Train and analyse parallel-connected neural networks on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more trials and write metrics, checkpoints, taxonomy and weights.
    Train(TrainArgs),
    /// Run the same experiment for several hidden activations and tabulate n_IV / max alpha_para.
    Compare {
        #[command(flatten)]
        train: TrainArgs,
        /// Comma-separated hidden activations.
        #[arg(long, value_delimiter = ',', default_value = "sigmoid,relu,tanh")]
        activations: Vec<ActivationKind>,
    },
    /// Accuracy curves of a checkpoint on the evaluation set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, env = "PNN_MNIST_DIR", default_value = "data/mnist")]
        data_dir: PathBuf,
        /// Write a one-row metrics CSV here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Type I-IV classification of the PNN's correct results.
    Taxonomy {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, env = "PNN_MNIST_DIR", default_value = "data/mnist")]
        data_dir: PathBuf,
        #[arg(long, default_value = "shared")]
        mask_mode: BiasMode,
        /// JSON report path; counts are always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Output-layer weight snapshot and per-sub-network magnitude summary.
    Weights {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV path; the summary is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient and merge checks on small random networks; needs no dataset.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Sub-network architectures joined with '+', e.g. 784,30,20,10+784,32,10.
    #[arg(long, default_value = DEFAULT_ARCH)]
    arch: String,
    #[arg(long, default_value = "A")]
    method: Method,
    /// Method A only.
    #[arg(long, default_value_t = 60)]
    epochs_separate: usize,
    /// Defaults to 40 for method A and 100 for method B.
    #[arg(long)]
    epochs_joint: Option<usize>,
    #[arg(long, default_value = "sigmoid")]
    activation: ActivationKind,
    #[arg(long, default_value = "sigmoid")]
    head_activation: ActivationKind,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Keep only the first N training examples (e.g. 50000).
    #[arg(long)]
    train_size: Option<usize>,
    /// Keep only the first N training examples; the smaller of this and --train-size wins.
    #[arg(long)]
    train_cap: Option<usize>,
    #[arg(long, env = "PNN_MNIST_DIR", default_value = "data/mnist")]
    data_dir: PathBuf,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Bias used for the masked sub-network results in the taxonomy.
    #[arg(long, default_value = "shared")]
    mask_mode: BiasMode,
    /// Experiment name recorded in logs.
    #[arg(long, default_value = "pnn")]
    name: String,
}

impl TrainArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let archs = parse_arch(&self.arch)?;
        if archs[0][0] != IMAGE_PIXELS || *archs[0].last().unwrap() != NUM_CLASSES {
            return Err(PnnError::InvalidArchitecture(format!(
                "MNIST runs need input width {IMAGE_PIXELS} and output width {NUM_CLASSES}, got {}",
                format_arch(&archs)
            )));
        }
        let epochs_joint = self.epochs_joint.unwrap_or(match self.method {
            Method::A => 40,
            Method::B => 100,
        });
        let config = TrainConfig {
            method: self.method,
            epochs_separate: self.epochs_separate,
            epochs_joint,
            eta: self.eta,
            lambda: self.lambda,
            batch_size: self.batch_size,
            seed: self.seed,
            activation: self.activation,
            head: self.head_activation,
        };
        config.validate()?;
        Ok(ExperimentSpec {
            name: self.name.clone(),
            archs,
            config,
            trials: self.trials,
            mask_mode: self.mask_mode,
            out_dir: self.out_dir.clone(),
        })
    }

    fn load(&self) -> Result<pnn_core::data::Dataset> {
        let data = load_mnist(&self.data_dir, self.train_size, self.train_cap)?;
        info!("loaded {} training / {} evaluation examples", data.train.len(), data.eval.len());
        Ok(data)
    }
}

fn print_summaries(summaries: &[&pnn_core::experiment::TrialSummary]) {
    println!("trial,run_index,seed,best_epoch,max_alpha_para,n_I,n_II,n_III,n_IV");
    let mut sorted = summaries.to_vec();
    sorted.sort_by_key(|s| s.trial);
    for s in sorted {
        let c = &s.type_counts;
        println!(
            "{},{},{},{},{:.4},{},{},{},{}",
            s.trial, s.run_index, s.seed, s.best_epoch, s.max_alpha_para, c.i, c.ii, c.iii, c.iv
        );
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(args) => {
            let spec = args.spec()?;
            let data = args.load()?;
            let outcomes = run_experiment(&spec, &data)?;
            print_summaries(&outcomes.iter().map(|o| &o.summary).collect::<Vec<_>>());
            println!("artifacts written to {}", spec.out_dir.display());
        }
        Command::Compare { train, activations } => {
            let spec = train.spec()?;
            let data = train.load()?;
            let columns = run_comparison(&spec, &activations, &data)?;
            print!("{}", pnn_core::experiment::format_comparison_table(&columns));
            println!("artifacts written to {}", spec.out_dir.display());
        }
        Command::Eval { checkpoint, data_dir, out } => {
            let model = load_checkpoint(&checkpoint)?;
            let eval = load_mnist_eval(&data_dir)?;
            let m = epoch_metrics(&model, &eval, 0)?;
            match out {
                Some(path) => write_metrics_csv(path, &[m])?,
                None => {
                    let cols = metrics_columns(model.subnet_count());
                    println!("{}", cols[1..].join(","));
                    let mut vals = vec![format!("{:.6}", m.alpha_para)];
                    for (a, ap) in m.alpha.iter().zip(&m.alpha_prime) {
                        vals.push(format!("{a:.6}"));
                        vals.push(format!("{ap:.6}"));
                    }
                    println!("{}", vals.join(","));
                }
            }
        }
        Command::Taxonomy {
            checkpoint,
            data_dir,
            mask_mode,
            out,
        } => {
            let model = load_checkpoint(&checkpoint)?;
            let eval = load_mnist_eval(&data_dir)?;
            let t = categorize(&model, &eval, mask_mode)?;
            let c = &t.type_counts;
            println!("mask_mode,total_correct,I,II,III,IV");
            println!("{},{},{},{},{},{}", t.mask_mode, t.total_correct, c.i, c.ii, c.iii, c.iv);
            if let Some(path) = out {
                write_taxonomy_json(path, &t)?;
            }
        }
        Command::Weights { checkpoint, out } => {
            let model = load_checkpoint(&checkpoint)?;
            let ws = weight_snapshot(&model);
            println!("subnet,mean_abs,max_abs,rms");
            for s in weight_balance(&ws) {
                println!("{},{:.6},{:.6},{:.6}", s.subnet, s.mean_abs, s.max_abs, s.rms);
            }
            if let Some(path) = out {
                write_weights_csv(path, &ws)?;
            }
        }
        Command::Selftest { seed } => {
            let checks = run_selftest(seed)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.passed()));
        }
    }
    Ok(true)
}

fn error_line(e: &PnnError) -> String {
    let mut line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    if let PnnError::Io { path, .. } | PnnError::IdxFormat { path, .. } = e {
        line["path"] = serde_json::Value::String(Path::new(path).display().to_string());
    }
    line.to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", error_line(&e));
            ExitCode::from(1)
        }
    }
}

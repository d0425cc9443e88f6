use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kgam_cli::commands;
use kgam_cli::config::{
    DatasetSpec, DeltaSpec, LambdaSpec, OptimizerSpec, OuterSpec, RunConfig, TaskKind,
};
use kgam_cli::CliError;

#[derive(Parser)]
#[command(
    name = "kgam",
    version,
    about = "Kolmogorov-GAM networks: fixed Köppen embeddings with trainable ReLU outer functions",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the Köppen inner function onto a CSV
    Psi(PsiArgs),
    /// Embed a feature CSV into the 2d+1 KST channels
    Embed(EmbedArgs),
    /// Generate the Friedman #1 benchmark dataset
    Simulate(SimulateArgs),
    /// Train a K-GAM model and write checkpoint + metrics
    Train(TrainArgs),
    /// Re-evaluate a checkpoint on its dataset
    Eval(EvalArgs),
    /// Sample a trained outer function g over its observed input range
    Gplot(GplotArgs),
    /// Fit the IRLS logistic-regression baseline on binarized Iris
    Glm(GlmArgs),
}

#[derive(Args)]
struct PsiArgs {
    /// Expansion base
    #[arg(long, default_value_t = 10)]
    gamma: u32,
    /// Truncation depth k
    #[arg(long, default_value_t = 3)]
    k_digits: u32,
    /// Branching parameter n of beta(r)
    #[arg(long, default_value_t = 2)]
    n_beta: u32,
    /// Number of grid points
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    /// Lower end of the sampled interval
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    /// Upper end of the sampled interval
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Input feature CSV (header row, numeric columns)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    gamma: u32,
    #[arg(long, default_value_t = 6)]
    k_digits: u32,
    #[arg(long)]
    n_beta: Option<u32>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    noise_sd: f64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Optional manifest JSON path
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON file with a full RunConfig; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset: "friedman" or "iris"
    #[arg(long)]
    dataset: Option<String>,
    /// Path to the Iris CSV
    #[arg(long, default_value = "data/iris.csv")]
    iris_path: String,
    /// Friedman sample count
    #[arg(long)]
    n: Option<usize>,
    /// Friedman generator seed
    #[arg(long)]
    data_seed: Option<u64>,
    /// Friedman noise standard deviation
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    gamma: Option<u32>,
    #[arg(long)]
    k_digits: Option<u32>,
    #[arg(long)]
    n_beta: Option<u32>,
    /// "sprecher" or a geometric ratio like "0.5"
    #[arg(long)]
    lambda: Option<String>,
    /// "index" or "zero"
    #[arg(long)]
    delta: Option<String>,
    /// "shared", "per-channel" or "badic:<base>"
    #[arg(long)]
    outer: Option<String>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    /// "sgd" or "sgd-momentum"
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training rows of the split (rest is the test set)
    #[arg(long)]
    train_n: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Output directory for checkpoint.json, metrics.json, trace.csv
    #[arg(long, default_value = "runs/latest")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint JSON written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Override the Iris CSV location stored in the checkpoint
    #[arg(long)]
    iris_path: Option<String>,
}

#[derive(Args)]
struct GplotArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Channel index q (required for per-channel checkpoints)
    #[arg(long)]
    channel: Option<usize>,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GlmArgs {
    #[arg(long, default_value = "data/iris.csv")]
    iris_path: String,
    /// Training rows (default fits all 150)
    #[arg(long)]
    train_n: Option<usize>,
    /// Split seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Optional JSON export of the fit
    #[arg(long)]
    json_out: Option<PathBuf>,
}

fn resolve_train_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?
        }
        None => match args.dataset.as_deref() {
            Some("friedman") | None => RunConfig::friedman_default(),
            Some("iris") => RunConfig::iris_default(&args.iris_path),
            Some(other) => {
                return Err(CliError::usage(format!(
                    "unknown dataset {other:?} (expected friedman or iris)"
                )))
            }
        },
    };
    // Flag overrides on top of a file-provided config.
    if args.config.is_some() {
        if let Some(ds) = args.dataset.as_deref() {
            match ds {
                "friedman" => {
                    config.dataset =
                        DatasetSpec::Friedman { n: 100, seed: 20240601, noise_sd: 1.0 }
                }
                "iris" => config.dataset = DatasetSpec::Iris { path: args.iris_path.clone() },
                other => {
                    return Err(CliError::usage(format!(
                        "unknown dataset {other:?} (expected friedman or iris)"
                    )))
                }
            }
        }
    }
    if let DatasetSpec::Friedman { n, seed, noise_sd } = &mut config.dataset {
        if let Some(v) = args.n {
            *n = v;
        }
        if let Some(v) = args.data_seed {
            *seed = v;
        }
        if let Some(v) = args.noise_sd {
            *noise_sd = v;
        }
    }
    if let Some(task) = args.task.as_deref() {
        config.task = match task {
            "regression" => TaskKind::Regression,
            "classification" => TaskKind::Classification,
            other => return Err(CliError::usage(format!("unknown task {other:?}"))),
        };
    }
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.k_digits {
        config.k_digits = v;
    }
    if args.n_beta.is_some() {
        config.n_beta = args.n_beta;
    }
    if let Some(lambda) = args.lambda.as_deref() {
        config.lambda = if lambda == "sprecher" {
            LambdaSpec::Sprecher
        } else {
            let ratio: f64 = lambda.parse().map_err(|_| {
                CliError::usage(format!("--lambda expects \"sprecher\" or a ratio, got {lambda:?}"))
            })?;
            LambdaSpec::Geometric { lambda: ratio }
        };
    }
    if let Some(delta) = args.delta.as_deref() {
        config.delta = match delta {
            "index" => DeltaSpec::Index,
            "zero" => DeltaSpec::Zero,
            other => return Err(CliError::usage(format!("unknown delta mode {other:?}"))),
        };
    }
    if let Some(outer) = args.outer.as_deref() {
        config.outer = match outer {
            "shared" => OuterSpec::Shared,
            "per-channel" => OuterSpec::PerChannel,
            other => match other.strip_prefix("badic:") {
                Some(base) => OuterSpec::Badic {
                    base: base
                        .parse()
                        .map_err(|_| CliError::usage(format!("bad badic base in {other:?}")))?,
                },
                None => return Err(CliError::usage(format!("unknown outer mode {other:?}"))),
            },
        };
    }
    if let Some(v) = args.width {
        config.hidden_width = v;
    }
    if let Some(v) = args.depth {
        config.hidden_depth = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.momentum {
        config.momentum = v;
    }
    if let Some(optimizer) = args.optimizer.as_deref() {
        config.optimizer = match optimizer {
            "sgd" => OptimizerSpec::Sgd,
            "sgd-momentum" => OptimizerSpec::SgdMomentum,
            other => return Err(CliError::usage(format!("unknown optimizer {other:?}"))),
        };
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.train_n.is_some() {
        config.train_n = args.train_n;
    }
    if args.split_seed.is_some() {
        config.split_seed = args.split_seed;
    }
    config.apply_env_seed()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Psi(a) => {
            commands::cmd_psi(a.gamma, a.k_digits, a.n_beta, a.grid, a.lo, a.hi, &a.out)
        }
        Command::Embed(a) => commands::cmd_embed(&a.input, a.gamma, a.k_digits, a.n_beta, &a.out),
        Command::Simulate(a) => {
            commands::cmd_simulate(a.n, a.seed, a.noise_sd, &a.out, a.manifest.as_deref())
        }
        Command::Train(a) => {
            let config = resolve_train_config(&a)?;
            commands::cmd_train(&config, &a.out_dir).map(|_| ())
        }
        Command::Eval(a) => commands::cmd_eval(&a.checkpoint, a.iris_path.as_deref()).map(|_| ()),
        Command::Gplot(a) => commands::cmd_gplot(&a.checkpoint, a.channel, a.grid, &a.out),
        Command::Glm(a) => {
            commands::cmd_glm(&a.iris_path, a.train_n, a.seed, a.json_out.as_deref()).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help and --version through Err; those exit 0
            let code = if e.use_stderr() { 1u8 } else { 0u8 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rnn_introspect::geometry::TsneConfig;
use rnn_introspect::report::commands::{
    cmd_analyze, cmd_experiment, cmd_reproduce, cmd_train, AnalyzeArgs, CommandError, ExperimentArgs, IdxPair,
    ReproduceArgs, TrainArgs,
};
use rnn_introspect::trainer::{EpochMetrics, Precision, TrainConfig};

#[derive(Parser)]
#[command(
    name = "rnn-introspect",
    version,
    about = "Train and probe a row-sequential MNIST RNN"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write a checkpoint plus per-epoch metrics.
    Train(TrainFlags),
    /// Run perturbation experiments 1 (blank tail), 2 (truncate), 3 (pad blank).
    Experiment(ExperimentFlags),
    /// Hidden-state dimensionality, t-SNE embeddings and k-NN purity.
    Analyze(AnalyzeFlags),
    /// Train, then run all experiments and the analysis with default settings.
    ReproducePaper(ReproduceFlags),
}

#[derive(Args)]
struct TestData {
    #[arg(long)]
    test_images: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
}

impl TestData {
    fn pair(&self) -> IdxPair {
        IdxPair {
            images: self.test_images.clone(),
            labels: self.test_labels.clone(),
        }
    }
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    train_images: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[command(flatten)]
    test: TestData,
    #[arg(long, default_value = "out/train")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Use only the first N examples of each dataset.
    #[arg(long)]
    limit: Option<usize>,
    /// Train in double precision.
    #[arg(long)]
    double: bool,
    /// Drop the readout bias.
    #[arg(long)]
    no_output_bias: bool,
}

impl TrainFlags {
    fn to_args(&self, argv: &[String]) -> TrainArgs {
        let mut config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            precision: if self.double {
                Precision::Double
            } else {
                Precision::Single
            },
            ..TrainConfig::default()
        };
        config.adam.lr = self.lr;
        config.arch.output_bias = !self.no_output_bias;
        TrainArgs {
            train: IdxPair {
                images: self.train_images.clone(),
                labels: self.train_labels.clone(),
            },
            test: self.test.pair(),
            out_dir: self.out_dir.clone(),
            config,
            limit: self.limit,
            argv: argv.to_vec(),
        }
    }
}

#[derive(Args)]
struct ExperimentFlags {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    test: TestData,
    #[arg(long, default_value = "out/experiments")]
    out_dir: PathBuf,
    /// Comma-separated experiment numbers.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    exp: Vec<u8>,
    /// Comma-separated perturbation amounts replacing the default grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct AnalysisFlags {
    #[arg(long, value_delimiter = ',', default_value = "4,14,28")]
    timesteps: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    subsample: usize,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
}

impl AnalysisFlags {
    fn apply(&self, args: &mut AnalyzeArgs, seed: u64) {
        args.timesteps = self.timesteps.clone();
        args.subsample = self.subsample;
        args.tsne = TsneConfig {
            perplexity: self.perplexity,
            iterations: self.iterations,
            seed,
            ..TsneConfig::default()
        };
    }
}

#[derive(Args)]
struct AnalyzeFlags {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    test: TestData,
    #[arg(long, default_value = "out/analysis")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    analysis: AnalysisFlags,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct ReproduceFlags {
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

fn print_epoch(m: &EpochMetrics) {
    let test = m.test_acc.map(|a| format!("  test acc {a:.4}")).unwrap_or_default();
    eprintln!(
        "epoch {:>3}  loss {:.4}  train acc {:.4}{test}  ({:.1}s)",
        m.epoch, m.train_loss, m.train_acc, m.seconds
    );
}

fn configure_threads() -> Result<(), CommandError> {
    let Ok(raw) = std::env::var("RNN_INTROSPECT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CommandError::Usage(format!(
            "RNN_INTROSPECT_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CommandError::Usage(e.to_string()))
}

fn run(cli: Cli, argv: &[String]) -> Result<(), CommandError> {
    configure_threads()?;
    match cli.command {
        Command::Train(f) => {
            let s = cmd_train(&f.to_args(argv), print_epoch)?;
            println!("{}", s.checkpoint.display());
        }
        Command::Experiment(f) => {
            let curves = cmd_experiment(&ExperimentArgs {
                checkpoint: f.checkpoint,
                test: f.test.pair(),
                out_dir: f.out_dir,
                experiments: f.exp,
                grid: f.grid,
                limit: f.limit,
                argv: argv.to_vec(),
            })?;
            for c in curves {
                println!("{}: {} points", c.kind, c.points.len());
            }
        }
        Command::Analyze(f) => {
            let mut args = AnalyzeArgs::with_defaults(f.checkpoint, f.test.pair(), f.out_dir);
            f.analysis.apply(&mut args, f.seed);
            args.limit = f.limit;
            args.argv = argv.to_vec();
            let s = cmd_analyze(&args)?;
            for (t, k, p) in s.purity {
                println!("t={t:<3} k={k:<3} purity {p:.4}");
            }
        }
        Command::ReproducePaper(f) => {
            let train = f.train.to_args(argv);
            let mut analyze = AnalyzeArgs::with_defaults(PathBuf::new(), IdxPair::default(), PathBuf::new());
            f.analysis.apply(&mut analyze, train.config.seed);
            analyze.limit = train.limit;
            analyze.argv = argv.to_vec();
            let (s, _, _) = cmd_reproduce(&ReproduceArgs { train, analyze }, print_epoch)?;
            println!("{}", s.checkpoint.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

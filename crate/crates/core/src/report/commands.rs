//! The `train`, `experiment`, `analyze` and `reproduce-paper` commands.
//!
//! Each command writes its artifacts atomically into an output directory and
//! finishes with a `manifest.json` listing every output with its SHA-256.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use super::csv;
use super::svg::{self, Axes, Series};
use super::{input_record, OutputDir, RunManifest};
use crate::checkpoint::{self, peek_precision, Checkpoint, CheckpointError};
use crate::dataset::{load_mnist, DatasetError, SequenceDataset};
use crate::geometry::{self, EmbeddingResult, GeometryError, Scope, TsneConfig};
use crate::perturbation::{accuracy_sweep, AccuracyCurve, PerturbationError, PerturbationKind};
use crate::real::Real;
use crate::rnn::RnnParams;
use crate::trainer::{self, EpochMetrics, Precision, TrainConfig, TrainError};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SPECTRA_FILE: &str = "spectra.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const PURITY_FILE: &str = "purity.csv";
pub const DIMENSIONALITY_SVG: &str = "dimensionality.svg";

/// Neighbourhood sizes reported in the purity table.
pub const PURITY_KS: [usize; 3] = [5, 10, 20];

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CommandError {
    /// 0 success, 2 usage, 3 data or parse error, 4 numeric failure, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 2,
            CommandError::Data(DatasetError::Io { .. }) => 5,
            CommandError::Data(_) => 3,
            CommandError::Checkpoint(CheckpointError::Io { .. }) => 5,
            CommandError::Checkpoint(_) => 3,
            CommandError::Train(TrainError::InvalidConfig(_)) => 2,
            CommandError::Train(TrainError::EmptyDataset | TrainError::RaggedBatch) => 3,
            CommandError::Train(_) => 4,
            CommandError::Perturbation(PerturbationError::AmountOutOfRange { .. } | PerturbationError::BadGrid) => 2,
            CommandError::Perturbation(PerturbationError::WrongLength { .. } | PerturbationError::EmptyDataset) => 3,
            CommandError::Perturbation(PerturbationError::Numeric(_)) => 4,
            CommandError::Geometry(
                GeometryError::TimestepOutOfRange { .. }
                | GeometryError::PerplexityTooLargeForN { .. }
                | GeometryError::KTooLarge { .. }
                | GeometryError::SubsampleTooLarge { .. },
            ) => 2,
            CommandError::Geometry(GeometryError::TooFewRows { .. } | GeometryError::LabelMismatch { .. }) => 3,
            CommandError::Geometry(_) => 4,
            CommandError::Io { .. } => 5,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Locations of an IDX image/label pair.
#[derive(Debug, Clone, Default)]
pub struct IdxPair {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

impl IdxPair {
    pub fn new(images: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        Self {
            images: Some(images.into()),
            labels: Some(labels.into()),
        }
    }

    fn require(&self, what: &str) -> Result<(&Path, &Path), CommandError> {
        let flag = |name: &str| format!("--{what}-{name}");
        let images = self
            .images
            .as_deref()
            .ok_or_else(|| CommandError::Usage(format!("missing required flag {}", flag("images"))))?;
        let labels = self
            .labels
            .as_deref()
            .ok_or_else(|| CommandError::Usage(format!("missing required flag {}", flag("labels"))))?;
        for p in [images, labels] {
            if !p.is_file() {
                return Err(CommandError::Usage(format!(
                    "dataset file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok((images, labels))
    }

    fn is_set(&self) -> bool {
        self.images.is_some() || self.labels.is_some()
    }

    fn load(&self, what: &str, limit: Option<usize>) -> Result<SequenceDataset, CommandError> {
        let (images, labels) = self.require(what)?;
        let ds = load_mnist(images, labels)?;
        Ok(match limit {
            Some(n) => ds.take(n),
            None => ds,
        })
    }

    fn records(&self) -> Result<Vec<super::OutputRecord>, CommandError> {
        let mut out = Vec::new();
        for p in [&self.images, &self.labels].into_iter().flatten() {
            out.push(input_record(p).map_err(io_err(p))?);
        }
        Ok(out)
    }
}

fn base_manifest(command: &str, argv: &[String]) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        argv: argv.to_vec(),
        config: BTreeMap::new(),
        seeds: BTreeMap::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        wall_clock_seconds: 0.0,
    }
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub train: IdxPair,
    /// Optional held-out set evaluated after every epoch.
    pub test: IdxPair,
    pub out_dir: PathBuf,
    pub config: TrainConfig,
    pub limit: Option<usize>,
    pub argv: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub metrics: Vec<EpochMetrics>,
}

pub fn cmd_train(args: &TrainArgs, mut on_epoch: impl FnMut(&EpochMetrics)) -> Result<TrainSummary, CommandError> {
    let timer = Instant::now();
    args.config.validate()?;
    let train_set = args.train.load("train", args.limit)?;
    let test_set = if args.test.is_set() {
        Some(args.test.load("test", args.limit)?)
    } else {
        None
    };
    let mut out = OutputDir::new(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let (bytes, metrics) = match args.config.precision {
        Precision::Single => {
            let o = trainer::train::<f32>(&args.config, &train_set, test_set.as_ref(), &mut on_epoch)?;
            (o.checkpoint.to_bytes(), o.metrics)
        }
        Precision::Double => {
            let o = trainer::train::<f64>(&args.config, &train_set, test_set.as_ref(), &mut on_epoch)?;
            (o.checkpoint.to_bytes(), o.metrics)
        }
    };
    let ckpt = out.write(CHECKPOINT_FILE, &bytes).map_err(io_err(&args.out_dir))?;
    out.write(METRICS_FILE, csv::metrics_csv(&metrics).as_bytes())
        .map_err(io_err(&args.out_dir))?;

    let mut manifest = base_manifest("train", &args.argv);
    let c = &args.config;
    for (k, v) in [
        ("epochs", c.epochs.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("lr", c.adam.lr.to_string()),
        ("beta1", c.adam.beta1.to_string()),
        ("beta2", c.adam.beta2.to_string()),
        ("eps", c.adam.eps.to_string()),
        ("precision", format!("{:?}", c.precision)),
        ("hidden", c.arch.hidden.to_string()),
        ("output_bias", c.arch.output_bias.to_string()),
        ("limit", args.limit.map_or("none".into(), |l| l.to_string())),
        ("train_examples", train_set.len().to_string()),
    ] {
        manifest.config.insert(k.into(), v);
    }
    manifest.seeds.insert("train".into(), c.seed);
    manifest.inputs = args.train.records()?;
    manifest.inputs.extend(args.test.records()?);
    manifest.wall_clock_seconds = timer.elapsed().as_secs_f64();
    out.finish(manifest).map_err(io_err(&args.out_dir))?;
    Ok(TrainSummary {
        checkpoint: ckpt,
        metrics,
    })
}

/// Parameters from a checkpoint in whichever precision it was saved.
#[derive(Debug, Clone)]
pub enum AnyParams {
    Single(RnnParams<f32>),
    Double(RnnParams<f64>),
}

pub fn load_params(path: &Path) -> Result<AnyParams, CommandError> {
    if !path.is_file() {
        return Err(CommandError::Usage(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    let bytes = checkpoint::read(path)?;
    Ok(match peek_precision(&bytes)? {
        Precision::Single => AnyParams::Single(Checkpoint::<f32>::from_bytes(&bytes)?.params),
        Precision::Double => AnyParams::Double(Checkpoint::<f64>::from_bytes(&bytes)?.params),
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentArgs {
    pub checkpoint: PathBuf,
    pub test: IdxPair,
    pub out_dir: PathBuf,
    /// Subset of {1, 2, 3}.
    pub experiments: Vec<u8>,
    /// Overrides each experiment's default grid.
    pub grid: Option<Vec<usize>>,
    pub limit: Option<usize>,
    pub argv: Vec<String>,
}

pub fn curve_file_stem(kind: PerturbationKind) -> String {
    format!("exp{}_{}", kind.experiment(), kind.name())
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<Vec<AccuracyCurve>, CommandError> {
    let timer = Instant::now();
    if args.experiments.is_empty() {
        return Err(CommandError::Usage("no experiment selected".into()));
    }
    let kinds = args
        .experiments
        .iter()
        .map(|&e| {
            PerturbationKind::from_experiment(e)
                .ok_or_else(|| CommandError::Usage(format!("experiment must be 1, 2 or 3, got {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let params = load_params(&args.checkpoint)?;
    let test_set = args.test.load("test", args.limit)?;
    let mut out = OutputDir::new(&args.out_dir).map_err(io_err(&args.out_dir))?;

    let mut curves = Vec::new();
    for &kind in &kinds {
        let grid = args.grid.clone().unwrap_or_else(|| kind.default_grid());
        let curve = match &params {
            AnyParams::Single(p) => accuracy_sweep(p, &test_set, kind, &grid)?,
            AnyParams::Double(p) => accuracy_sweep(p, &test_set, kind, &grid)?,
        };
        let stem = curve_file_stem(kind);
        out.write(&format!("{stem}.csv"), csv::curves_csv(&[&curve]).as_bytes())
            .map_err(io_err(&args.out_dir))?;
        out.write(&format!("{stem}.svg"), curve_svg(&[&curve]).as_bytes())
            .map_err(io_err(&args.out_dir))?;
        curves.push(curve);
    }
    let blank = curves.iter().find(|c| c.kind == PerturbationKind::BlankTail);
    let trunc = curves.iter().find(|c| c.kind == PerturbationKind::Truncate);
    if let (Some(b), Some(t)) = (blank, trunc) {
        out.write("exp1_exp2_shown_rows.svg", curve_svg(&[b, t]).as_bytes())
            .map_err(io_err(&args.out_dir))?;
    }

    let mut manifest = base_manifest("experiment", &args.argv);
    manifest.config.insert(
        "experiments".into(),
        args.experiments
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.config.insert(
        "grid".into(),
        args.grid.as_ref().map_or("default".into(), |g| {
            g.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
        }),
    );
    manifest
        .config
        .insert("test_examples".into(), test_set.len().to_string());
    manifest
        .inputs
        .push(input_record(&args.checkpoint).map_err(io_err(&args.checkpoint))?);
    manifest.inputs.extend(args.test.records()?);
    manifest.wall_clock_seconds = timer.elapsed().as_secs_f64();
    out.finish(manifest).map_err(io_err(&args.out_dir))?;
    Ok(curves)
}

/// Accuracy-curve chart. Experiments 1 and 2 are plotted against shown rows,
/// experiment 3 against appended blank rows.
pub fn curve_svg(curves: &[&AccuracyCurve]) -> String {
    let pad_only = curves.iter().all(|c| c.kind == PerturbationKind::PadBlank);
    let series: Vec<Series> = curves
        .iter()
        .map(|c| Series {
            name: format!("exp {} ({})", c.kind.experiment(), c.kind.name()),
            points: c
                .points
                .iter()
                .map(|p| {
                    let x = if pad_only { p.amount } else { p.shown_rows };
                    (x as f64, p.accuracy)
                })
                .collect(),
        })
        .collect();
    let axes = Axes {
        title: "Test accuracy under input perturbation".into(),
        x_label: if pad_only {
            "appended blank rows".into()
        } else {
            "image rows shown".into()
        },
        y_label: "accuracy".into(),
    };
    svg::line_chart(&axes, &series)
}

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub checkpoint: PathBuf,
    pub test: IdxPair,
    pub out_dir: PathBuf,
    /// Timesteps embedded with t-SNE and scored for purity.
    pub timesteps: Vec<usize>,
    /// Timesteps of the dimensionality curve.
    pub dim_timesteps: Vec<usize>,
    pub subsample: usize,
    pub tsne: TsneConfig,
    pub limit: Option<usize>,
    pub argv: Vec<String>,
}

impl AnalyzeArgs {
    pub fn with_defaults(checkpoint: PathBuf, test: IdxPair, out_dir: PathBuf) -> Self {
        Self {
            checkpoint,
            test,
            out_dir,
            timesteps: vec![4, 14, 28],
            dim_timesteps: (1..=28).collect(),
            subsample: 2000,
            tsne: TsneConfig::default(),
            limit: None,
            argv: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeSummary {
    pub global_dims: Vec<(usize, usize)>,
    /// `(timestep, k, purity)` in hidden-state space.
    pub purity: Vec<(usize, usize, f64)>,
    pub embeddings: Vec<(usize, EmbeddingResult)>,
    /// Test-set indices of the embedded subsample.
    pub subsample: Vec<usize>,
}

pub fn tsne_file(timestep: usize) -> String {
    format!("tsne_t{timestep:02}.svg")
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<AnalyzeSummary, CommandError> {
    let timer = Instant::now();
    if args.timesteps.is_empty() {
        return Err(CommandError::Usage("no timesteps requested".into()));
    }
    let params = load_params(&args.checkpoint)?;
    let test_set = args.test.load("test", args.limit)?;
    let mut out = OutputDir::new(&args.out_dir).map_err(io_err(&args.out_dir))?;
    let summary = match &params {
        AnyParams::Single(p) => analyze_with(p, &test_set, args, &mut out)?,
        AnyParams::Double(p) => analyze_with(p, &test_set, args, &mut out)?,
    };

    let mut manifest = base_manifest("analyze", &args.argv);
    let join = |v: &[usize]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
    for (k, v) in [
        ("timesteps", join(&args.timesteps)),
        ("dim_timesteps", join(&args.dim_timesteps)),
        ("subsample", summary.subsample.len().to_string()),
        ("perplexity", args.tsne.perplexity.to_string()),
        ("iterations", args.tsne.iterations.to_string()),
        ("learning_rate", args.tsne.learning_rate.to_string()),
        ("test_examples", test_set.len().to_string()),
    ] {
        manifest.config.insert(k.into(), v);
    }
    manifest.seeds.insert("subsample".into(), args.tsne.seed);
    manifest.seeds.insert("tsne".into(), args.tsne.seed);
    manifest
        .inputs
        .push(input_record(&args.checkpoint).map_err(io_err(&args.checkpoint))?);
    manifest.inputs.extend(args.test.records()?);
    manifest.wall_clock_seconds = timer.elapsed().as_secs_f64();
    out.finish(manifest).map_err(io_err(&args.out_dir))?;
    Ok(summary)
}

fn analyze_with<T: Real>(
    params: &RnnParams<T>,
    test_set: &SequenceDataset,
    args: &AnalyzeArgs,
    out: &mut OutputDir,
) -> Result<AnalyzeSummary, CommandError> {
    let root = out.root().to_path_buf();

    let curve = geometry::dimensionality_curve(params, test_set, &args.dim_timesteps)?;
    out.write(SPECTRA_FILE, csv::spectra_csv(&curve.spectra).as_bytes())
        .map_err(io_err(&root))?;
    let mut scopes = vec![Scope::Global];
    scopes.extend((0..10u8).map(Scope::Class));
    let series: Vec<Series> = scopes
        .iter()
        .map(|&scope| Series {
            name: scope.to_string(),
            points: curve.dims(scope).iter().map(|&(t, d)| (t as f64, d as f64)).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    let axes = Axes {
        title: "Components for 90% of hidden-state variance".into(),
        x_label: "timestep".into(),
        y_label: "dim90".into(),
    };
    out.write(DIMENSIONALITY_SVG, svg::line_chart(&axes, &series).as_bytes())
        .map_err(io_err(&root))?;

    let size = args.subsample.min(test_set.len());
    let indices = geometry::stratified_subsample(&test_set.labels, size, args.tsne.seed)?;
    let subset = test_set.select(&indices);
    let states = geometry::capture_states(params, &subset, &args.timesteps)?;

    let mut purity = Vec::new();
    let mut embeddings = Vec::new();
    for (&t, m) in &states {
        for k in PURITY_KS {
            if k < m.states.nrows() {
                purity.push((t, k, geometry::knn_purity(m.states.view(), &m.labels, k)?));
            }
        }
        let emb = geometry::tsne(m.states.view(), &m.labels, &args.tsne)?;
        let pts: Vec<(f64, f64)> = emb.points.rows().into_iter().map(|r| (r[0], r[1])).collect();
        let axes = Axes {
            title: format!("t-SNE of hidden states at timestep {t}"),
            x_label: "t-SNE 1".into(),
            y_label: "t-SNE 2".into(),
        };
        out.write(&tsne_file(t), svg::scatter_chart(&axes, &pts, &emb.labels).as_bytes())
            .map_err(io_err(&root))?;
        embeddings.push((t, emb));
    }
    out.write(PURITY_FILE, csv::purity_csv(&purity).as_bytes())
        .map_err(io_err(&root))?;
    let rows: Vec<(usize, &EmbeddingResult, &[usize])> =
        embeddings.iter().map(|(t, e)| (*t, e, indices.as_slice())).collect();
    out.write(EMBEDDING_FILE, csv::embedding_csv(&rows).as_bytes())
        .map_err(io_err(&root))?;

    Ok(AnalyzeSummary {
        global_dims: curve.dims(Scope::Global),
        purity,
        embeddings,
        subsample: indices,
    })
}

#[derive(Debug, Clone)]
pub struct ReproduceArgs {
    pub train: TrainArgs,
    pub analyze: AnalyzeArgs,
}

/// Train, then run experiments 1-3 and the geometry analysis on the result.
/// Outputs go to `train/`, `experiments/` and `analysis/` under the train
/// output directory.
pub fn cmd_reproduce(
    args: &ReproduceArgs,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(TrainSummary, Vec<AccuracyCurve>, AnalyzeSummary), CommandError> {
    let root = args.train.out_dir.clone();
    let train_args = TrainArgs {
        out_dir: root.join("train"),
        ..args.train.clone()
    };
    let summary = cmd_train(&train_args, on_epoch)?;
    let curves = cmd_experiment(&ExperimentArgs {
        checkpoint: summary.checkpoint.clone(),
        test: args.train.test.clone(),
        out_dir: root.join("experiments"),
        experiments: vec![1, 2, 3],
        grid: None,
        limit: args.train.limit,
        argv: args.train.argv.clone(),
    })?;
    let analysis = cmd_analyze(&AnalyzeArgs {
        checkpoint: summary.checkpoint.clone(),
        test: args.train.test.clone(),
        out_dir: root.join("analysis"),
        ..args.analyze.clone()
    })?;
    Ok((summary, curves, analysis))
}

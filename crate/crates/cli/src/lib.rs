//! Command implementations behind the `fer` binary.
//!
//! Exit codes: 0 success, 1 domain error (bad data, mismatched weights),
//! 2 usage or I/O error (missing files, undecodable images, bad flags).

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fer_core::data::{
    class_histogram, examples_for, inverse_frequency_weights, merge_labels, read_fer2013, read_ferplus, MergeReport,
    Usage, EMOTIONS,
};
use fer_core::detect::{detect_multiscale, load_cascade_file, DetectParams};
use fer_core::model::{build_resnet18, evaluate, load_weights, save_weights, ResNetConfig, TrainConfig, Trainer};
use fer_core::pipeline::{decode_image, predict_faces, to_gray, PipelineConfig, DEFAULT_TAU};
use fer_core::Rng;
use fer_service::{ServiceConfig, ServiceError};

/// File names looked up inside `--data`.
pub const FER2013_FILE: &str = "fer2013.csv";
pub const FERPLUS_FILE: &str = "fer2013new.csv";

#[derive(Debug)]
pub enum CliError {
    /// Exit code 1.
    Domain(String),
    /// Exit code 2.
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) | CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fer_core::Error> for CliError {
    fn from(e: fer_core::Error) -> Self {
        match e {
            fer_core::Error::Io(_) | fer_core::Error::Image(_) => CliError::Usage(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Core(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("{}: {e}", path.display()))
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fer", version, about = "Facial expression recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train ResNet18 on FER2013 images with FER+ labels.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of saved weights on one split.
    Eval(EvalArgs),
    /// Detect faces in an image and classify each one.
    Predict(PredictArgs),
    /// Run the face detector only.
    Detect(DetectArgs),
    /// Dataset inspection.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Run the HTTP/WebSocket service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// Per-split 8-class histograms after the label merge.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory containing fer2013.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// FER+ label file; defaults to fer2013new.csv inside --data.
    #[arg(long)]
    pub ferplus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Weights output; metrics and confusion CSVs are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f32,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f32,
    /// Disable random erasing and flips.
    #[arg(long)]
    pub no_augment: bool,
    /// Divide every stage width by this factor (1 = full ResNet18).
    #[arg(long, default_value_t = 1)]
    pub narrow: usize,
    /// Weight the loss by inverse class frequency.
    #[arg(long)]
    pub balanced: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Training,
    PublicTest,
    PrivateTest,
}

impl From<Split> for Usage {
    fn from(s: Split) -> Self {
        match s {
            Split::Training => Usage::Training,
            Split::PublicTest => Usage::PublicTest,
            Split::PrivateTest => Usage::PrivateTest,
        }
    }
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::PublicTest => "public-test",
            Split::PrivateTest => "private-test",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::PrivateTest)]
    pub split: Split,
    /// Confusion CSV path; defaults to `<weights>.<split>.confusion.csv`.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long)]
    pub cascade: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 1.1)]
    pub scale_factor: f64,
    #[arg(long, default_value_t = 3)]
    pub min_neighbors: usize,
    #[arg(long, default_value_t = 24)]
    pub min_size: usize,
}

impl DetectorArgs {
    fn params(&self) -> DetectParams {
        DetectParams {
            scale_factor: self.scale_factor,
            min_neighbors: self.min_neighbors,
            min_size: self.min_size,
        }
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Minimum top probability for a named label; below it the face is unknown.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f32,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Write the CSV here instead of printing it after the table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Service TOML; FER_CONFIG takes precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Predict(a) => predict(&a),
        Command::Detect(a) => detect(&a),
        Command::Data {
            command: DataCommand::Stats(a),
        } => stats(&a),
        Command::Serve(a) => serve(&a),
    }
}

/// Rows read from disk plus the merged labels.
pub struct Dataset {
    pub rows: usize,
    pub merged: MergeReport,
}

pub fn load_dataset(args: &DataArgs) -> CliResult<Dataset> {
    if !args.data.is_dir() {
        return Err(CliError::Usage(format!("data directory {} not found", args.data.display())));
    }
    let fer_path = args.data.join(FER2013_FILE);
    let plus_path = args.ferplus.clone().unwrap_or_else(|| args.data.join(FERPLUS_FILE));
    let fer = read_fer2013(&fer_path).map_err(|e| with_path(e, &fer_path))?;
    let votes = read_ferplus(&plus_path).map_err(|e| with_path(e, &plus_path))?;
    let merged = merge_labels(&fer, &votes)?;
    Ok(Dataset {
        rows: fer.len(),
        merged,
    })
}

fn with_path(e: fer_core::Error, path: &Path) -> CliError {
    match CliError::from(e) {
        CliError::Domain(m) => CliError::Domain(format!("{}: {m}", path.display())),
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
    }
}

/// `weights.ferw` -> `weights.<suffix>`.
pub fn sibling(weights: &Path, suffix: &str) -> PathBuf {
    weights.with_extension(suffix)
}

pub fn train(args: &TrainArgs) -> CliResult {
    let ds = load_dataset(&args.data)?;
    let train = examples_for(&ds.merged.samples, Usage::Training)?;
    let val = examples_for(&ds.merged.samples, Usage::PublicTest)?;
    if train.is_empty() {
        return Err(CliError::Domain("no Training samples after the label merge".into()));
    }
    let model_cfg = ResNetConfig {
        weight_decay: args.weight_decay,
        ..ResNetConfig::narrow(args.narrow)
    };
    let mut rng = Rng::new(args.seed);
    let model = build_resnet18(model_cfg, &mut rng.split())?;
    let class_weights = args
        .balanced
        .then(|| inverse_frequency_weights(&class_histogram(&ds.merged.samples, Usage::Training)));
    let cfg = TrainConfig {
        lr: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: rng.next_u64(),
        augment: !args.no_augment,
        class_weights,
        ..TrainConfig::default()
    };
    println!(
        "train_samples={} val_samples={} params={} epochs={} seed={}",
        train.len(),
        val.len(),
        ResNetConfig::narrow(args.narrow).parameter_count(),
        args.epochs,
        args.seed
    );
    let mut trainer = Trainer::new(model, cfg)?;
    let metrics = trainer.fit(&train, Some(&val), |m| println!("{}", m.log_line()))?.clone();

    save_weights(trainer.model(), &args.out).map_err(|e| with_path(e, &args.out))?;
    let metrics_path = sibling(&args.out, "metrics.csv");
    fs::write(&metrics_path, metrics.to_csv()).map_err(io_err(&metrics_path))?;
    println!("weights={}", args.out.display());
    println!("metrics={}", metrics_path.display());
    if let Some(cm) = &metrics.confusion {
        let path = sibling(&args.out, "confusion.csv");
        fs::write(&path, cm.to_csv()).map_err(io_err(&path))?;
        println!("confusion={}", path.display());
    }
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CliResult {
    let model = load_weights(&args.weights).map_err(|e| with_path(e, &args.weights))?;
    let ds = load_dataset(&args.data)?;
    let examples = examples_for(&ds.merged.samples, args.split.into())?;
    if examples.is_empty() {
        return Err(CliError::Domain(format!("split {} is empty", args.split.name())));
    }
    let result = evaluate(&model, &examples)?;
    let path = args
        .confusion
        .clone()
        .unwrap_or_else(|| sibling(&args.weights, &format!("{}.confusion.csv", args.split.name())));
    fs::write(&path, result.confusion.to_csv()).map_err(io_err(&path))?;
    println!(
        "split={} samples={} accuracy={:.6} loss={:.6}",
        args.split.name(),
        examples.len(),
        result.accuracy,
        result.loss
    );
    println!("confusion={}", path.display());
    Ok(())
}

fn read_image(path: &Path) -> CliResult<image::DynamicImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_image(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn predict(args: &PredictArgs) -> CliResult {
    let model = load_weights(&args.weights).map_err(|e| with_path(e, &args.weights))?;
    let cascade = load_cascade_file(&args.detector.cascade).map_err(|e| with_path(e, &args.detector.cascade))?;
    let image = read_image(&args.detector.image)?;
    let cfg = PipelineConfig {
        tau: args.tau,
        detect: args.detector.params(),
    };
    let faces = predict_faces(&model, &cascade, &image, &cfg)?;
    if faces.is_empty() {
        println!("no face detected");
        return Ok(());
    }
    let mut out = String::new();
    for (i, f) in faces.iter().enumerate() {
        let b = &f.bbox;
        let _ = writeln!(
            out,
            "face {}: x={} y={} w={} h={} neighbors={}",
            i + 1,
            b.x,
            b.y,
            b.w,
            b.h,
            b.neighbor_count
        );
        for (name, p) in EMOTIONS.iter().zip(f.distribution.probs) {
            let _ = writeln!(out, "  {name:<10} {p:.4}");
        }
        let _ = writeln!(out, "  label={} emoji={}", f.label, f.emoji);
    }
    print!("{out}");
    Ok(())
}

pub fn detect(args: &DetectArgs) -> CliResult {
    let cascade = load_cascade_file(&args.detector.cascade).map_err(|e| with_path(e, &args.detector.cascade))?;
    let image = read_image(&args.detector.image)?;
    let boxes = detect_multiscale(&cascade, &to_gray(&image), &args.detector.params())?;
    for b in boxes {
        println!("{} {} {} {} {}", b.x, b.y, b.w, b.h, b.neighbor_count);
    }
    Ok(())
}

/// Aligned text table and CSV of per-split class counts.
pub fn stats_tables(ds: &Dataset) -> (String, String) {
    let mut header = vec!["split"];
    header.extend(EMOTIONS);
    header.push("total");
    let rows: Vec<Vec<String>> = Usage::ALL
        .iter()
        .map(|&split| {
            let h = class_histogram(&ds.merged.samples, split);
            let mut row = vec![split.as_str().to_string()];
            row.extend(h.iter().map(usize::to_string));
            row.push(h.iter().sum::<usize>().to_string());
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let mut text = String::new();
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        padded.join("  ")
    };
    let _ = writeln!(text, "{}", line(header.clone()));
    for r in &rows {
        let _ = writeln!(text, "{}", line(r.iter().map(String::as_str).collect()));
    }
    let m = &ds.merged;
    let _ = writeln!(
        text,
        "rows={} merged={} excluded={} (all_zero={} unknown_or_not_face={} low_count={})",
        ds.rows,
        m.samples.len(),
        m.excluded(),
        m.all_zero,
        m.unknown_or_not_face,
        m.low_count
    );
    let mut csv = header.join(",") + "\n";
    for r in &rows {
        csv += &(r.join(",") + "\n");
    }
    (text, csv)
}

pub fn stats(args: &StatsArgs) -> CliResult {
    let ds = load_dataset(&args.data)?;
    let (text, csv) = stats_tables(&ds);
    print!("{text}");
    match &args.csv {
        Some(path) => {
            fs::write(path, &csv).map_err(io_err(path))?;
            println!("csv={}", path.display());
        }
        None => print!("\n{csv}"),
    }
    Ok(())
}

pub fn serve(args: &ServeArgs) -> CliResult {
    let path = ServiceConfig::locate(args.config.as_deref())
        .ok_or_else(|| CliError::Usage("no config: pass --config or set FER_CONFIG".into()))?;
    let config = ServiceConfig::load(&path)?;
    let _ = tracing_subscriber::fmt().try_init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    runtime.block_on(fer_service::serve(config))?;
    Ok(())
}

//! `polarface` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use polarface::image::{read_pgm_file, write_pgm_file};
use polarface::logpolar::log_polar_with;
use polarface::mlp::Decision;
use polarface::pipeline::{
    emit_curves, ingest_dataset, load_run, run_evaluation, run_training, save_run, Arm,
    CurvePoint, LabeledDataset, PipelineConfig, RunConfig, DEFAULT_SPLIT_FRACTION, REPORT_FILE,
    SPLIT_FILE,
};
use polarface::synth::CorpusSpec;
use polarface::{compute_geometry, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "polarface", version, about = "Log-polar eigenface recognition pipeline")]
struct Cli {
    /// Log progress (same as RUST_LOG=info)
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Log-polar transform one PGM image and print its geometry
    Transform(TransformArgs),
    /// Write a deterministic synthetic face corpus
    Synth(SynthArgs),
    /// Train a model on a dataset and write the run directory
    Train(TrainArgs),
    /// Evaluate a run on its TEST split and write report.csv
    Eval(EvalArgs),
    /// Classify a single image with a trained run
    Classify(ClassifyArgs),
    /// Train both arms and sweep TEST subset sizes into a curves CSV
    Curves(CurvesArgs),
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Log-polar base Z (output side is a power of Z)
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..))]
    base: u32,
    /// Maximum sample value of the written PGM
    #[arg(long, default_value_t = 255, value_parser = clap::value_parser!(u16).range(1..))]
    maxval: u16,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    subjects: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    per_subject: u64,
    /// Rotations drawn from [-R, R] degrees
    #[arg(long, default_value_t = 20.0, value_parser = nonneg_f64)]
    max_rotation: f64,
    /// Scales drawn from [1-J, 1+J]
    #[arg(long, default_value_t = 0.1, value_parser = unit_half_open)]
    scale_jitter: f64,
    /// Standard deviation of additive Gaussian noise
    #[arg(long, default_value_t = 0.02, value_parser = nonneg_f64)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Square frame size; --height/--width override
    #[arg(long, default_value_t = 96, value_parser = clap::value_parser!(u64).range(3..))]
    size: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(3..))]
    height: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(3..))]
    width: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Fraction of each subject's images used for training
    #[arg(long, default_value_t = DEFAULT_SPLIT_FRACTION, value_parser = unit_open)]
    split: f64,
    /// Seed of the train/test split
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..))]
    base: u32,
    /// Fraction of eigenvalue mass kept when choosing U
    #[arg(long, default_value_t = 0.95, value_parser = unit_half_closed)]
    variance_keep: f64,
    /// Upper bound on U
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_u: Option<u64>,
    /// Hidden layer sizes
    #[arg(long, value_delimiter = ',', default_value = "100,60,30", value_parser = positive_usize)]
    hidden: Vec<usize>,
    /// Learning rate; keep lr x (training images) modest, the gradient is summed
    #[arg(long, default_value_t = 0.02, value_parser = positive_f64)]
    lr: f64,
    #[arg(long, default_value_t = 0.9, value_parser = unit_closed)]
    momentum: f64,
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    max_epochs: u64,
    #[arg(long, default_value_t = 1e-3, value_parser = nonneg_f64)]
    target_mse: f64,
    /// Seed of the weight initialization
    #[arg(long, default_value_t = 1)]
    init_seed: u64,
}

impl ModelArgs {
    fn pipeline(&self, polar: bool) -> Result<PipelineConfig> {
        let train = TrainConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            max_epochs: self.max_epochs as usize,
            target_mse: self.target_mse,
            seed: self.init_seed,
        };
        train.validate()?;
        Ok(PipelineConfig {
            polar,
            base: self.base,
            variance_keep: self.variance_keep,
            max_u: self.max_u.map(|u| u as usize),
            hidden: self.hidden.clone(),
            train,
        })
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset root: <data>/<subject>/*.pgm
    #[arg(long)]
    data: PathBuf,
    /// Run directory to write
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    polar: Toggle,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    /// Re-ingest this dataset root with the run's split settings instead of split.csv
    #[arg(long)]
    data: Option<PathBuf>,
    /// Reject when the winning output is below this value
    #[arg(long, value_parser = finite_f64)]
    threshold: Option<f64>,
    /// Evaluate only the first N test images
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    subset_size: Option<u64>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = finite_f64)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[arg(long)]
    data: PathBuf,
    /// Curves CSV to write
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40", value_parser = positive_usize)]
    subset_sizes: Vec<usize>,
    #[arg(long, value_parser = finite_f64)]
    threshold: Option<f64>,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    model: ModelArgs,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("`{s}` is not a number: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn finite_f64(s: &str) -> Result<f64, String> {
    parse_f64(s)
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 { Ok(v) } else { Err(format!("{v} must be positive")) }
}

fn nonneg_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 { Ok(v) } else { Err(format!("{v} must be nonnegative")) }
}

fn unit_open(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 { Ok(v) } else { Err(format!("{v} must lie in (0, 1)")) }
}

fn unit_half_open(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..1.0).contains(&v) { Ok(v) } else { Err(format!("{v} must lie in [0, 1)")) }
}

fn unit_half_closed(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 { Ok(v) } else { Err(format!("{v} must lie in (0, 1]")) }
}

fn unit_closed(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) { Ok(v) } else { Err(format!("{v} must lie in [0, 1]")) }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(format!("`{s}` is not a positive integer: {e}")),
    }
}

fn transform(args: &TransformArgs) -> Result<()> {
    let img = read_pgm_file(&args.input)?;
    let geom = compute_geometry(img.height(), img.width(), args.base)
        .with_context(|| format!("cannot transform {}", args.input.display()))?;
    let out = log_polar_with(&img, &geom);
    write_pgm_file(&args.output, &out, args.maxval)?;
    println!(
        "m={} n={} R={} q={} S={}",
        geom.center_row, geom.center_col, geom.radius, geom.exponent, geom.side
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = CorpusSpec {
        subjects: args.subjects as usize,
        images_per_subject: args.per_subject as usize,
        height: args.height.unwrap_or(args.size) as usize,
        width: args.width.unwrap_or(args.size) as usize,
        max_rotation_deg: args.max_rotation,
        scale_jitter: args.scale_jitter,
        noise_sigma: args.noise,
        seed: args.seed,
    };
    spec.validate()?;
    let written = spec.write(&args.out)?;
    println!(
        "wrote {} images for {} subjects to {}",
        written.len(),
        spec.subjects,
        args.out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = args.model.pipeline(args.polar == Toggle::On)?;
    let ds = ingest_dataset(&args.data, args.split.split, args.split.seed)?;
    let model = run_training(&ds, &cfg)?;
    let rc = RunConfig {
        data_root: Some(args.data.display().to_string()),
        split_fraction: args.split.split,
        split_seed: args.split.seed,
        pipeline: cfg,
        normalizer: model.normalizer,
    };
    save_run(&args.out, &ds, &rc, &model)?;
    println!(
        "arm={} subjects={} train={} side={} U={} epochs={} mse={:.6e}",
        Arm::from_polar(rc.pipeline.polar),
        ds.subjects.len(),
        ds.train_samples().count(),
        model.space.side(),
        model.space.rank(),
        model.state.epoch,
        model.state.final_mse().unwrap_or(f64::NAN)
    );
    println!("run written to {}", args.out.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let (rc, model) =
        load_run(&args.run).with_context(|| format!("cannot load run {}", args.run.display()))?;
    let ds = match &args.data {
        Some(root) => ingest_dataset(root, rc.split_fraction, rc.split_seed)?,
        None => LabeledDataset::from_split_csv(&args.run.join(SPLIT_FILE))?,
    };
    let subset = args.subset_size.map(|n| n as usize);
    let report = run_evaluation(&ds, &model, args.threshold, subset)?;
    let arm = Arm::from_polar(rc.pipeline.polar);
    let path = args.run.join(REPORT_FILE);
    let csv = emit_curves(&[CurvePoint::new(arm, report.total, &report)]);
    fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    println!(
        "arm={arm} total={} correct={} rejected={} misclassified={}",
        report.total, report.correct, report.rejected, report.misclassified
    );
    println!(
        "recognition_rate={:.6} false_rejection_rate={:.6}",
        report.recognition_rate, report.false_rejection_rate
    );
    Ok(())
}

fn classify(args: &ClassifyArgs) -> Result<()> {
    let (_, model) =
        load_run(&args.run).with_context(|| format!("cannot load run {}", args.run.display()))?;
    let img = read_pgm_file(&args.input)?;
    let name = args.input.display().to_string();
    let (decision, outputs) = model.classify(&name, &img, args.threshold)?;
    match decision {
        Decision::Accept(k) => println!("subject={} output={:.6}", model.subjects[k], outputs[k]),
        Decision::Reject => println!("reject"),
    }
    Ok(())
}

fn curves(args: &CurvesArgs) -> Result<()> {
    let configs = [args.model.pipeline(true)?, args.model.pipeline(false)?];
    let ds = ingest_dataset(&args.data, args.split.split, args.split.seed)?;
    let mut points = Vec::new();
    for cfg in &configs {
        let arm = Arm::from_polar(cfg.polar);
        let model = run_training(&ds, cfg).with_context(|| format!("training {arm} arm"))?;
        for &n in &args.subset_sizes {
            let report = run_evaluation(&ds, &model, args.threshold, Some(n))?;
            points.push(CurvePoint::new(arm, n, &report));
        }
    }
    write_new(&args.out, &emit_curves(&points))?;
    print!("{}", emit_curves(&points));
    Ok(())
}

fn write_new(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Transform(a) => transform(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Classify(a) => classify(a),
        Command::Curves(a) => {
            if a.subset_sizes.is_empty() {
                bail!("--subset-sizes needs at least one size");
            }
            curves(a)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

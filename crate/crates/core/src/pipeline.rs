//! End-to-end recognition: ingest, log-polar (or plain) normalization,
//! eigenspace from the training split, MLP training, evaluation and run
//! persistence.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigenspace::{build_eigenspace, BuildStatus, EigenError, EigenSpace};
use crate::image::{read_pgm_file, resize_nearest, GrayImage, PgmFileError};
use crate::logpolar::{compute_geometry, log_polar_with, PolarError, DEFAULT_BASE};
use crate::mlp::{
    decide, one_hot, train, Decision, LayerParams, MlpError, MlpNetwork, TrainConfig, TrainState,
    DEFAULT_HIDDEN,
};
use crate::persist::to_json;
use crate::synth::mix_seed;

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.56;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read dataset root {path}")]
    Root {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset root {0} has fewer than 2 subject directories")]
    TooFewSubjects(String),
    #[error("subject directory {path} has {count} PGM files, need at least 2")]
    TooFewImages { path: String, count: usize },
    #[error(transparent)]
    Image(#[from] PgmFileError),
    #[error("split fraction must lie in (0, 1), got {0}")]
    BadSplit(f64),
    #[error("no training samples")]
    NoTrainingSamples,
    #[error("no test samples to evaluate")]
    NoTestSamples,
    #[error("{path} is {found_h}x{found_w} but training images are {expected_h}x{expected_w}")]
    SourceSize {
        path: String,
        expected_h: usize,
        expected_w: usize,
        found_h: usize,
        found_w: usize,
    },
    #[error(
        "dimension mismatch: model expects D={expected} ({model_side}x{model_side}), \
         {path} yields D={found} ({found_side}x{found_side})"
    )]
    Dimension {
        path: String,
        expected: usize,
        model_side: usize,
        found: usize,
        found_side: usize,
    },
    #[error("subject `{0}` is not known to the model")]
    UnknownSubject(String),
    #[error("eigenspace has rank 0: all training images are identical after normalization")]
    RankZero,
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub path: String,
    pub subject: usize,
    pub split: Split,
    pub image: GrayImage,
}

/// Images grouped by subject with a train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub subjects: Vec<String>,
    pub samples: Vec<Sample>,
}

/// Number of training images for a subject with `count` images: rounded
/// fraction, at least one so every subject is enrolled.
pub fn train_count(count: usize, fraction: f64) -> usize {
    ((fraction * count as f64).round() as usize).clamp(1, count)
}

impl LabeledDataset {
    /// Stratified split: per subject, a seeded shuffle of the images (in the
    /// given order) sends the first `train_count` to TRAIN.
    pub fn split(
        subjects: Vec<(String, Vec<(String, GrayImage)>)>,
        fraction: f64,
        seed: u64,
    ) -> Result<Self, PipelineError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(PipelineError::BadSplit(fraction));
        }
        let mut names = Vec::with_capacity(subjects.len());
        let mut samples = Vec::new();
        for (index, (name, images)) in subjects.into_iter().enumerate() {
            let n_train = train_count(images.len(), fraction);
            let mut order: Vec<usize> = (0..images.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, index as u64));
            order.shuffle(&mut rng);
            let mut split = vec![Split::Test; images.len()];
            for &k in &order[..n_train] {
                split[k] = Split::Train;
            }
            for ((path, image), split) in images.into_iter().zip(split) {
                samples.push(Sample {
                    path,
                    subject: index,
                    split,
                    image,
                });
            }
            names.push(name);
        }
        Ok(Self {
            subjects: names,
            samples,
        })
    }

    pub fn train_samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.split == Split::Train)
    }

    /// Test samples interleaved across subjects: the first test image of every
    /// subject, then the second, and so on. Prefixes of this order are the
    /// evaluation subsets.
    pub fn test_order(&self) -> Vec<&Sample> {
        let mut rank = vec![0usize; self.subjects.len()];
        let mut keyed: Vec<(usize, usize, &Sample)> = Vec::new();
        for s in self.samples.iter().filter(|s| s.split == Split::Test) {
            keyed.push((rank[s.subject], s.subject, s));
            rank[s.subject] += 1;
        }
        keyed.sort_by_key(|&(r, subj, _)| (r, subj));
        keyed.into_iter().map(|(_, _, s)| s).collect()
    }

    /// `path,subject,arm` rows, where `arm` is the partition.
    pub fn split_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "subject", "arm"]).expect("in-memory write");
        for s in &self.samples {
            w.write_record([
                s.path.as_str(),
                self.subjects[s.subject].as_str(),
                &s.split.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Reloads a dataset recorded by [`split_csv`], reading every image.
    pub fn from_split_csv(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut subjects: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| PipelineError::Format {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            if record.len() != 3 {
                return Err(PipelineError::Format {
                    path: path.display().to_string(),
                    reason: format!("expected 3 columns, found {}", record.len()),
                });
            }
            let split: Split = record[2].parse().map_err(|reason| PipelineError::Format {
                path: path.display().to_string(),
                reason,
            })?;
            let subject = match subjects.iter().position(|s| s == &record[1]) {
                Some(k) => k,
                None => {
                    subjects.push(record[1].to_owned());
                    subjects.len() - 1
                }
            };
            rows.push((record[0].to_owned(), subject, split));
        }
        let samples = rows
            .into_par_iter()
            .map(|(p, subject, split)| {
                let image = read_pgm_file(&p)?;
                Ok(Sample {
                    path: p,
                    subject,
                    split,
                    image,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Ok(Self { subjects, samples })
    }
}

/// Reads `<root>/<subject>/*.pgm`. Subjects and files are taken in name order.
pub fn ingest_dataset(
    root: impl AsRef<Path>,
    fraction: f64,
    seed: u64,
) -> Result<LabeledDataset, PipelineError> {
    let root = root.as_ref();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PipelineError::BadSplit(fraction));
    }
    let root_err = |source| PipelineError::Root {
        path: root.display().to_string(),
        source,
    };
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(root_err)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.len() < 2 {
        return Err(PipelineError::TooFewSubjects(root.display().to_string()));
    }
    let mut subjects = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
            })
            .collect();
        files.sort();
        if files.len() < 2 {
            return Err(PipelineError::TooFewImages {
                path: dir.display().to_string(),
                count: files.len(),
            });
        }
        let images = files
            .par_iter()
            .map(|p| Ok((p.display().to_string(), read_pgm_file(p)?)))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        subjects.push((name, images));
    }
    LabeledDataset::split(subjects, fraction, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Plain,
    Polar,
}

impl Arm {
    pub fn from_polar(polar: bool) -> Self {
        if polar {
            Arm::Polar
        } else {
            Arm::Plain
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Plain => "plain",
            Arm::Polar => "polar",
        })
    }
}

impl FromStr for Arm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plain" | "off" => Ok(Arm::Plain),
            "polar" | "on" => Ok(Arm::Polar),
            other => Err(format!("unknown arm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub polar: bool,
    pub base: u32,
    pub variance_keep: f64,
    pub max_u: Option<usize>,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            polar: true,
            base: DEFAULT_BASE,
            variance_keep: crate::eigenspace::DEFAULT_VARIANCE_KEEP,
            max_u: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            train: TrainConfig::default(),
        }
    }
}

/// Maps source images onto the common `side x side` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub polar: bool,
    pub base: u32,
    pub source_height: usize,
    pub source_width: usize,
    pub side: usize,
}

impl Normalizer {
    pub fn for_source(polar: bool, base: u32, height: usize, width: usize) -> Result<Self, PolarError> {
        let geom = compute_geometry(height, width, base)?;
        Ok(Self {
            polar,
            base,
            source_height: height,
            source_width: width,
            side: geom.side,
        })
    }

    /// Log-polar transform, or a plain nearest-neighbor resize to the same
    /// side. The output side follows the image's own geometry.
    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage, PolarError> {
        let geom = compute_geometry(img.height(), img.width(), self.base)?;
        if self.polar {
            Ok(log_polar_with(img, &geom))
        } else {
            Ok(resize_nearest(img, geom.side, geom.side).expect("side >= 2"))
        }
    }
}

/// A trained eigenspace + classifier pair with everything needed to classify
/// new images.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub normalizer: Normalizer,
    pub subjects: Vec<String>,
    pub space: EigenSpace,
    pub net: MlpNetwork,
    pub train_config: TrainConfig,
    pub state: TrainState,
}

impl TrainedModel {
    pub fn features(&self, normalized: &GrayImage) -> Result<Vec<f64>, EigenError> {
        Ok(self.space.project_vec(normalized.pixels())?.0)
    }

    /// Normalizes, projects and classifies one source image.
    pub fn classify(
        &self,
        path: &str,
        img: &GrayImage,
        threshold: Option<f64>,
    ) -> Result<(Decision, Vec<f64>), PipelineError> {
        let normalized = self.normalizer.apply(img)?;
        let found = normalized.pixels().len();
        if found != self.space.dim() {
            return Err(PipelineError::Dimension {
                path: path.to_owned(),
                expected: self.space.dim(),
                model_side: self.space.side(),
                found,
                found_side: normalized.height(),
            });
        }
        let x = self.features(&normalized)?;
        let out = self.net.forward(&x)?.output().to_vec();
        Ok((decide(&out, threshold), out))
    }
}

/// Normalizes every TRAIN image, builds the eigenspace from them and trains
/// the network on their projections with one-hot `±1` targets.
pub fn run_training(ds: &LabeledDataset, cfg: &PipelineConfig) -> Result<TrainedModel, PipelineError> {
    cfg.train.validate()?;
    let train_set: Vec<&Sample> = ds.train_samples().collect();
    let first = train_set.first().ok_or(PipelineError::NoTrainingSamples)?;
    if ds.subjects.len() < 2 {
        return Err(PipelineError::TooFewSubjects(format!(
            "dataset with {} subject(s)",
            ds.subjects.len()
        )));
    }
    let (h, w) = (first.image.height(), first.image.width());
    for s in &train_set {
        if (s.image.height(), s.image.width()) != (h, w) {
            return Err(PipelineError::SourceSize {
                path: s.path.clone(),
                expected_h: h,
                expected_w: w,
                found_h: s.image.height(),
                found_w: s.image.width(),
            });
        }
    }
    let normalizer = Normalizer::for_source(cfg.polar, cfg.base, h, w)?;
    let normalized = train_set
        .par_iter()
        .map(|s| normalizer.apply(&s.image))
        .collect::<Result<Vec<_>, _>>()?;

    let (space, status) = build_eigenspace(&normalized, cfg.variance_keep, cfg.max_u)?;
    if status == BuildStatus::RankZero {
        return Err(PipelineError::RankZero);
    }
    let inputs = normalized
        .par_iter()
        .map(|img| space.project_vec(img.pixels()).map(|fv| fv.0))
        .collect::<Result<Vec<_>, _>>()?;
    let classes = ds.subjects.len();
    let targets: Vec<Vec<f64>> = train_set.iter().map(|s| one_hot(s.subject, classes)).collect();

    let mut sizes = vec![space.rank()];
    sizes.extend(&cfg.hidden);
    sizes.push(classes);
    let net = MlpNetwork::init(&sizes, cfg.train.seed)?;
    let (net, state) = train(net, &inputs, &targets, &cfg.train)?;
    log::info!(
        "trained {} arm: U={}, layers {:?}, {} epochs, mse {:.3e}",
        Arm::from_polar(cfg.polar),
        space.rank(),
        sizes,
        state.epoch,
        state.final_mse().unwrap_or(f64::NAN)
    );
    Ok(TrainedModel {
        normalizer,
        subjects: ds.subjects.clone(),
        space,
        net,
        train_config: cfg.train.clone(),
        state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectTally {
    pub subject: String,
    pub total: usize,
    pub correct: usize,
    pub rejected: usize,
    pub misclassified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub rejected: usize,
    pub misclassified: usize,
    pub recognition_rate: f64,
    pub false_rejection_rate: f64,
    pub per_subject: Vec<SubjectTally>,
}

impl EvalReport {
    /// Checks the tally identities.
    pub fn is_consistent(&self) -> bool {
        let n = self.total as f64;
        self.correct + self.rejected + self.misclassified == self.total
            && self.recognition_rate == self.correct as f64 / n
            && self.false_rejection_rate == (self.rejected + self.misclassified) as f64 / n
            && (self.false_rejection_rate - (1.0 - self.recognition_rate)).abs() <= 1e-12
    }
}

/// Classifies TEST samples (the first `subset_size` in [`LabeledDataset::test_order`]
/// when given) and tallies the outcomes.
pub fn run_evaluation(
    ds: &LabeledDataset,
    model: &TrainedModel,
    threshold: Option<f64>,
    subset_size: Option<usize>,
) -> Result<EvalReport, PipelineError> {
    let mut tests = ds.test_order();
    if let Some(n) = subset_size {
        tests.truncate(n);
    }
    if tests.is_empty() {
        return Err(PipelineError::NoTestSamples);
    }
    // dataset subject index -> model class index
    let class_of = ds
        .subjects
        .iter()
        .map(|name| {
            model
                .subjects
                .iter()
                .position(|m| m == name)
                .ok_or_else(|| PipelineError::UnknownSubject(name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let decisions = tests
        .par_iter()
        .map(|s| model.classify(&s.path, &s.image, threshold).map(|(d, _)| d))
        .collect::<Result<Vec<_>, _>>()?;

    let mut tallies: Vec<SubjectTally> = model
        .subjects
        .iter()
        .map(|name| SubjectTally {
            subject: name.clone(),
            total: 0,
            correct: 0,
            rejected: 0,
            misclassified: 0,
        })
        .collect();
    for (s, d) in tests.iter().zip(decisions) {
        let truth = class_of[s.subject];
        let t = &mut tallies[truth];
        t.total += 1;
        match d {
            Decision::Accept(k) if k == truth => t.correct += 1,
            Decision::Accept(_) => t.misclassified += 1,
            Decision::Reject => t.rejected += 1,
        }
    }
    let total = tests.len();
    let correct: usize = tallies.iter().map(|t| t.correct).sum();
    let rejected: usize = tallies.iter().map(|t| t.rejected).sum();
    let misclassified: usize = tallies.iter().map(|t| t.misclassified).sum();
    Ok(EvalReport {
        total,
        correct,
        rejected,
        misclassified,
        recognition_rate: correct as f64 / total as f64,
        false_rejection_rate: (rejected + misclassified) as f64 / total as f64,
        per_subject: tallies,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub arm: Arm,
    pub subset_size: usize,
    pub recognition_rate: f64,
    pub false_rejection_rate: f64,
}

impl CurvePoint {
    pub fn new(arm: Arm, subset_size: usize, report: &EvalReport) -> Self {
        Self {
            arm,
            subset_size,
            recognition_rate: report.recognition_rate,
            false_rejection_rate: report.false_rejection_rate,
        }
    }
}

pub const CURVES_HEADER: &str = "arm,subset_size,recognition_rate,false_rejection_rate";

/// CSV of recognition and false-rejection rates, sorted by `(arm, subset_size)`.
pub fn emit_curves(points: &[CurvePoint]) -> String {
    let mut sorted: Vec<&CurvePoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.arm
            .to_string()
            .cmp(&b.arm.to_string())
            .then(a.subset_size.cmp(&b.subset_size))
    });
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for p in sorted {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            p.arm, p.subset_size, p.recognition_rate, p.false_rejection_rate
        ));
    }
    out
}

pub fn parse_curves(text: &str) -> Result<Vec<CurvePoint>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>().join(",") != CURVES_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            let num = |i: usize| r[i].parse::<f64>().map_err(|e| e.to_string());
            Ok(CurvePoint {
                arm: r[0].parse()?,
                subset_size: r[1].parse().map_err(|e: std::num::ParseIntError| e.to_string())?,
                recognition_rate: num(2)?,
                false_rejection_rate: num(3)?,
            })
        })
        .collect()
}

/// Serialized network, `weights[l][i][j]` row-major per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFile {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    pub train_config: TrainConfig,
    pub final_mse: f64,
    pub epochs: usize,
    pub subjects: Vec<String>,
}

impl MlpFile {
    pub fn from_model(model: &TrainedModel) -> Self {
        let sizes = model.net.layer_sizes();
        Self {
            layer_sizes: sizes.to_vec(),
            weights: model
                .net
                .layers()
                .iter()
                .zip(sizes.windows(2))
                .map(|(l, w)| l.weights.chunks(w[0]).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: model.net.layers().iter().map(|l| l.biases.clone()).collect(),
            activation: "tansig".to_owned(),
            train_config: model.train_config.clone(),
            final_mse: model.state.final_mse().unwrap_or(f64::NAN),
            epochs: model.state.epoch,
            subjects: model.subjects.clone(),
        }
    }

    pub fn network(&self) -> Result<MlpNetwork, MlpError> {
        if self.activation != "tansig" {
            return Err(MlpError::Inconsistent(format!(
                "unsupported activation `{}`",
                self.activation
            )));
        }
        let layers = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| LayerParams {
                weights: w.concat(),
                biases: b.clone(),
            })
            .collect();
        MlpNetwork::from_params(&self.layer_sizes, layers)
    }
}

/// Everything in `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_root: Option<String>,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub pipeline: PipelineConfig,
    pub normalizer: Normalizer,
}

pub const EIGENSPACE_FILE: &str = "eigenspace.json";
pub const MLP_FILE: &str = "mlp.json";
pub const SPLIT_FILE: &str = "split.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const CONFIG_FILE: &str = "config.json";

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn json<T: Serialize>(value: &T) -> String {
    to_json(value).expect("model types serialize")
}

/// Writes `eigenspace.json`, `mlp.json`, `split.csv` and `config.json`.
pub fn save_run(
    dir: &Path,
    ds: &LabeledDataset,
    config: &RunConfig,
    model: &TrainedModel,
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(EIGENSPACE_FILE), &json(&model.space))?;
    write_file(&dir.join(MLP_FILE), &json(&MlpFile::from_model(model)))?;
    write_file(&dir.join(SPLIT_FILE), &ds.split_csv())?;
    write_file(&dir.join(CONFIG_FILE), &json(config))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_run(dir: &Path) -> Result<(RunConfig, TrainedModel), PipelineError> {
    let config: RunConfig = read_json(&dir.join(CONFIG_FILE))?;
    let space: EigenSpace = read_json(&dir.join(EIGENSPACE_FILE))?;
    space.validate()?;
    let file: MlpFile = read_json(&dir.join(MLP_FILE))?;
    let net = file.network()?;
    if net.input_len() != space.rank() {
        return Err(PipelineError::Format {
            path: dir.join(MLP_FILE).display().to_string(),
            reason: format!(
                "network input {} does not match eigenspace rank {}",
                net.input_len(),
                space.rank()
            ),
        });
    }
    let mut history = Vec::new();
    if file.final_mse.is_finite() {
        history.push(file.final_mse);
    }
    let state = TrainState {
        prev_delta: crate::mlp::Gradient::zeros_like(&net),
        epoch: file.epochs,
        mse_history: history,
    };
    Ok((
        config.clone(),
        TrainedModel {
            normalizer: config.normalizer,
            subjects: file.subjects,
            space,
            net,
            train_config: file.train_config,
            state,
        },
    ))
}

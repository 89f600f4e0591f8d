//! Face recognition on log-polar eigenfaces.
//!
//! Images are mapped to a fixed-size log-polar grid (rotation about the
//! center becomes a circular column shift, scaling a row shift), projected
//! onto an eigenface basis computed from the training split, and classified
//! by a tansig multilayer perceptron trained with full-batch backpropagation
//! and momentum.
//!
//! Modules, bottom-up:
//! - [`image`]: grayscale images, PGM codec, nearest-neighbor resize
//! - [`synth`]: deterministic synthetic faces and corpora
//! - [`logpolar`]: the log-polar transform
//! - [`linalg`]: symmetric eigensolver
//! - [`eigenspace`]: snapshot PCA, projection, reconstruction
//! - [`mlp`]: network, batch gradient, momentum training, classification
//! - [`pipeline`]: datasets, training/evaluation runs, curves, run files

pub mod eigenspace;
pub mod image;
pub mod linalg;
pub mod logpolar;
pub mod mlp;
pub mod persist;
pub mod pipeline;
pub mod synth;

pub use eigenspace::{build_eigenspace, project, reconstruct, EigenSpace, FeatureVector};
pub use image::{read_pgm, resize_nearest, write_pgm, GrayImage};
pub use logpolar::{circular_column_shift, compute_geometry, log_polar_transform, PolarGeometry};
pub use mlp::{momentum_step, train, Decision, MlpNetwork, TrainConfig, TrainState};
pub use pipeline::{
    emit_curves, ingest_dataset, run_evaluation, run_training, EvalReport, LabeledDataset,
    PipelineConfig, TrainedModel,
};

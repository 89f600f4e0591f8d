//! Eigenface basis built with the snapshot method, and projection into it.
//!
//! For `P` training vectors of length `D`, the centered data `A` (`D x P`)
//! has the same nonzero spectrum in `A Aᵀ` (`D x D`) and `L = Aᵀ A`
//! (`P x P`). With `L v = μ v`, `u = A v / √μ` is a unit eigenvector of
//! `A Aᵀ` with eigenvalue `μ`. Eigenvalues are stored without a `1/P` factor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::GrayImage;
use crate::linalg::{dot, jacobi_eigen, norm};

pub const DEFAULT_VARIANCE_KEEP: f64 = 0.95;

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("need at least 2 training images, got {0}")]
    TooFewImages(usize),
    #[error("image {index} is {height}x{width}; training images must be square")]
    NotSquare {
        index: usize,
        height: usize,
        width: usize,
    },
    #[error("image {index} is {found}x{found}, expected {expected}x{expected}")]
    SizeMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("variance_keep must lie in (0, 1], got {0}")]
    BadVarianceKeep(f64),
    #[error("dimension mismatch: eigenspace has D={expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature vector has {found} coordinates, eigenspace has U={expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("inconsistent eigenspace: {0}")]
    Inconsistent(String),
}

/// Coordinates of an image in face space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildStatus {
    Ok,
    /// All centered training vectors were zero; the basis is empty.
    RankZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpace {
    dim: usize,
    side: usize,
    mean_face: Vec<f64>,
    eigenvalues: Vec<f64>,
    basis: Vec<Vec<f64>>,
    variance_keep: f64,
}

impl EigenSpace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of eigenfaces `U`.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn mean_face(&self) -> &[f64] {
        &self.mean_face
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn variance_keep(&self) -> f64 {
        self.variance_keep
    }

    /// Checks shape invariants of a deserialized space.
    pub fn validate(&self) -> Result<(), EigenError> {
        let bad = |m: String| Err(EigenError::Inconsistent(m));
        if self.side * self.side != self.dim {
            return bad(format!("side {} does not match dim {}", self.side, self.dim));
        }
        if self.mean_face.len() != self.dim {
            return bad(format!("mean_face has {} entries", self.mean_face.len()));
        }
        if self.eigenvalues.len() != self.basis.len() {
            return bad(format!(
                "{} eigenvalues for {} basis vectors",
                self.eigenvalues.len(),
                self.basis.len()
            ));
        }
        if let Some(k) = self.basis.iter().position(|u| u.len() != self.dim) {
            return bad(format!("basis vector {k} has wrong length"));
        }
        Ok(())
    }

    /// Same as [`project`] on a raw vector of length `D`.
    pub fn project_vec(&self, x: &[f64]) -> Result<FeatureVector, EigenError> {
        if x.len() != self.dim {
            return Err(EigenError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean_face).map(|(a, b)| a - b).collect();
        Ok(FeatureVector(
            self.basis.iter().map(|u| dot(u, &centered)).collect(),
        ))
    }

    /// Restricts the space to its leading `u` eigenfaces.
    pub fn truncated(&self, u: usize) -> EigenSpace {
        let u = u.min(self.rank());
        EigenSpace {
            basis: self.basis[..u].to_vec(),
            eigenvalues: self.eigenvalues[..u].to_vec(),
            ..self.clone()
        }
    }
}

/// Builds the eigenspace of square training images of equal size.
///
/// `U` is the smallest count whose eigenvalue mass reaches `variance_keep` of
/// the total, capped by `max_u` and by `P - 1`. Each eigenface is signed so
/// that its largest-magnitude component is positive.
pub fn build_eigenspace(
    images: &[GrayImage],
    variance_keep: f64,
    max_u: Option<usize>,
) -> Result<(EigenSpace, BuildStatus), EigenError> {
    if images.len() < 2 {
        return Err(EigenError::TooFewImages(images.len()));
    }
    if !(variance_keep > 0.0 && variance_keep <= 1.0) {
        return Err(EigenError::BadVarianceKeep(variance_keep));
    }
    let side = images[0].height();
    for (index, img) in images.iter().enumerate() {
        if img.height() != img.width() {
            return Err(EigenError::NotSquare {
                index,
                height: img.height(),
                width: img.width(),
            });
        }
        if img.height() != side {
            return Err(EigenError::SizeMismatch {
                index,
                expected: side,
                found: img.height(),
            });
        }
    }
    let vectors: Vec<&[f64]> = images.iter().map(GrayImage::pixels).collect();
    Ok(build_from_vectors(&vectors, side, variance_keep, max_u))
}

pub(crate) fn build_from_vectors(
    vectors: &[&[f64]],
    side: usize,
    variance_keep: f64,
    max_u: Option<usize>,
) -> (EigenSpace, BuildStatus) {
    let p = vectors.len();
    let dim = side * side;

    let mut mean_face = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean_face.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    for m in &mut mean_face {
        *m /= p as f64;
    }
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean_face).map(|(x, m)| x - m).collect())
        .collect();

    // L = AᵀA, upper triangle; each entry is independent so rows parallelize
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| (i..p).map(|j| dot(&centered[i], &centered[j])).collect())
        .collect();
    let mut gram = vec![0.0; p * p];
    for (i, row) in rows.iter().enumerate() {
        for (k, &g) in row.iter().enumerate() {
            gram[i * p + i + k] = g;
            gram[(i + k) * p + i] = g;
        }
    }

    let eig = jacobi_eigen(&gram, p);
    let top = eig.values.first().copied().unwrap_or(0.0);
    let positive: Vec<usize> = if top > 0.0 {
        (0..p)
            .filter(|&k| eig.values[k] > RANK_TOLERANCE * top)
            .collect()
    } else {
        Vec::new()
    };

    let mut space = EigenSpace {
        dim,
        side,
        mean_face,
        eigenvalues: Vec::new(),
        basis: Vec::new(),
        variance_keep,
    };
    if positive.is_empty() {
        log::warn!("all training images are identical; eigenspace is empty");
        return (space, BuildStatus::RankZero);
    }

    let total: f64 = positive.iter().map(|&k| eig.values[k]).sum();
    let mut keep = positive.len();
    let mut acc = 0.0;
    for (count, &k) in positive.iter().enumerate() {
        acc += eig.values[k];
        if acc >= variance_keep * total {
            keep = count + 1;
            break;
        }
    }
    keep = keep.min(p - 1);
    if let Some(cap) = max_u {
        keep = keep.min(cap);
    }

    for &k in &positive[..keep] {
        let v = &eig.vectors[k];
        let mut u = vec![0.0; dim];
        for (col, &w) in centered.iter().zip(v) {
            for (ui, ci) in u.iter_mut().zip(col) {
                *ui += w * ci;
            }
        }
        // re-orthogonalize against earlier eigenfaces to absorb roundoff
        for prev in &space.basis {
            let proj = dot(prev, &u);
            for (ui, pi) in u.iter_mut().zip(prev) {
                *ui -= proj * pi;
            }
        }
        let len = norm(&u);
        let mut pivot = 0.0f64;
        for &x in &u {
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let scale = if pivot < 0.0 { -1.0 / len } else { 1.0 / len };
        for x in &mut u {
            *x *= scale;
        }
        space.basis.push(u);
        space.eigenvalues.push(eig.values[k]);
    }
    (space, BuildStatus::Ok)
}

pub fn project(img: &GrayImage, space: &EigenSpace) -> Result<FeatureVector, EigenError> {
    space.project_vec(img.pixels())
}

/// `ψ + Σ ω_k u_k`, unclamped.
pub fn reconstruct(fv: &FeatureVector, space: &EigenSpace) -> Result<Vec<f64>, EigenError> {
    if fv.len() != space.rank() {
        return Err(EigenError::FeatureLength {
            expected: space.rank(),
            found: fv.len(),
        });
    }
    let mut out = space.mean_face.clone();
    for (w, u) in fv.0.iter().zip(&space.basis) {
        for (o, ui) in out.iter_mut().zip(u) {
            *o += w * ui;
        }
    }
    Ok(out)
}

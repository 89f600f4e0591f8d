//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use polarface::mlp::MlpNetwork;
use polarface::synth::{synth_face, FaceParams, Render};
use polarface::GrayImage;

/// Direct eigendecomposition of the `D x D` covariance `(1/P) A Aᵀ`, eigenpairs
/// sorted by descending eigenvalue.
pub fn direct_covariance_eigen(vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = vectors.len();
    let d = vectors[0].len();
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / p as f64;
        }
    }
    let a = DMatrix::from_fn(d, p, |i, j| vectors[j][i] - mean[i]);
    let cov = (&a * a.transpose()) / p as f64;
    let eig = SymmetricEigen::new(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.into_iter().unzip()
}

/// Central differences of the batch loss `½ Σ ‖t − o‖²` for every parameter.
pub fn finite_difference_gradient(
    net: &MlpNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    step: f64,
) -> Vec<f64> {
    let loss = |n: &MlpNetwork| -> f64 {
        inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                let out = n.forward(x).unwrap();
                0.5 * out
                    .output()
                    .iter()
                    .zip(t)
                    .map(|(o, t)| (t - o).powi(2))
                    .sum::<f64>()
            })
            .sum()
    };
    (0..net.param_count())
        .map(|k| {
            let mut plus = net.clone();
            *plus.param_mut(k) += step;
            let mut minus = net.clone();
            *minus.param_mut(k) -= step;
            (loss(&plus) - loss(&minus)) / (2.0 * step)
        })
        .collect()
}

/// `max |a - b| / max(|b|, floor)` over components.
pub fn max_relative_error(analytic: &[f64], reference: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}

pub fn face(subject: u64, size: usize, rotation_deg: f64, scale: f64) -> GrayImage {
    synth_face(
        0,
        &FaceParams::for_subject(42, subject),
        &Render {
            height: size,
            width: size,
            rotation_deg,
            scale,
            noise_sigma: 0.0,
        },
    )
}

/// Lightly blurred random image, to keep nearest-neighbor effects small.
pub fn pattern(seed: u64, size: usize) -> GrayImage {
    let params = FaceParams::for_subject(seed, 1000 + seed);
    synth_face(
        seed,
        &params,
        &Render {
            height: size,
            width: size,
            ..Render::default()
        },
    )
}

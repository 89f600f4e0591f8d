mod common;

use polarface::eigenspace::{build_eigenspace, project, reconstruct, EigenSpace, FeatureVector};
use polarface::image::GrayImage;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::direct_covariance_eigen;

fn random_images(rng: &mut ChaCha8Rng, side: usize, count: usize) -> Vec<GrayImage> {
    (0..count)
        .map(|_| GrayImage::from_fn(side, side, |_, _| rng.random_range(0.0..1.0)))
        .collect()
}

fn max_orthonormality_error(space: &EigenSpace) -> f64 {
    let b = space.basis();
    let mut worst = 0.0f64;
    for i in 0..b.len() {
        for j in 0..b.len() {
            let d: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
            let e = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((d - e).abs());
        }
    }
    worst
}

#[test]
fn three_images_match_direct_covariance() {
    let imgs = [
        GrayImage::new(2, 2, vec![0.1, 0.9, 0.3, 0.2]).unwrap(),
        GrayImage::new(2, 2, vec![0.5, 0.4, 0.8, 0.1]).unwrap(),
        GrayImage::new(2, 2, vec![0.7, 0.2, 0.1, 0.6]).unwrap(),
    ];
    let (space, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
    let vectors: Vec<Vec<f64>> = imgs.iter().map(|i| i.pixels().to_vec()).collect();
    let (values, vectors) = direct_covariance_eigen(&vectors);
    assert_eq!(space.rank(), 2);
    for k in 0..2 {
        let snapshot = space.eigenvalues()[k] / 3.0;
        assert!((snapshot - values[k]).abs() <= 1e-8 * values[k]);
        let u = &space.basis()[k];
        let sign = if u.iter().zip(&vectors[k]).map(|(a, b)| a * b).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for (a, b) in u.iter().zip(&vectors[k]) {
            assert!((a - sign * b).abs() <= 1e-8);
        }
    }
    assert!(values[2].abs() < 1e-12 && values[3].abs() < 1e-12);
}

#[test]
fn random_instances_match_direct_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let side = rng.random_range(2..=8);
        let p = rng.random_range(2..=10);
        let imgs = random_images(&mut rng, side, p);
        let (space, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
        assert!(max_orthonormality_error(&space) <= 1e-8);
        assert!(space.rank() < p);
        let vectors: Vec<Vec<f64>> = imgs.iter().map(|i| i.pixels().to_vec()).collect();
        let (values, directs) = direct_covariance_eigen(&vectors);
        for k in 0..space.rank() {
            let snapshot = space.eigenvalues()[k] / p as f64;
            assert!((snapshot - values[k]).abs() <= 1e-8 * values[k].abs());
            let u = &space.basis()[k];
            let dot: f64 = u.iter().zip(&directs[k]).map(|(a, b)| a * b).sum();
            let sign = dot.signum();
            for (a, b) in u.iter().zip(&directs[k]) {
                assert!((a - sign * b).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn projection_matches_naive_dot_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let imgs = random_images(&mut rng, 5, 7);
    let (space, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
    let probe = random_images(&mut rng, 5, 1).pop().unwrap();
    let fv = project(&probe, &space).unwrap();
    for (k, u) in space.basis().iter().enumerate() {
        let mut acc = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..25 {
            acc += u[i] * (probe.pixels()[i] - space.mean_face()[i]);
        }
        assert!((fv.0[k] - acc).abs() < 1e-12);
    }
}

#[test]
fn full_rank_reconstruction_recovers_training_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let imgs = random_images(&mut rng, 6, 8);
    let (space, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
    assert_eq!(space.rank(), 7);
    for img in &imgs {
        let back = reconstruct(&project(img, &space).unwrap(), &space).unwrap();
        for (a, b) in back.iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn reconstruction_error_shrinks_with_more_eigenfaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let imgs = random_images(&mut rng, 6, 9);
    let (space, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
    for img in &imgs {
        let mut last = f64::INFINITY;
        for u in 1..=space.rank() {
            let sub = space.truncated(u);
            let back = reconstruct(&project(img, &sub).unwrap(), &sub).unwrap();
            let err: f64 = back
                .iter()
                .zip(img.pixels())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= last + 1e-12);
            last = err;
        }
    }
}

#[test]
fn zero_features_reconstruct_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (space, _) = build_eigenspace(&random_images(&mut rng, 3, 4), 1.0, None).unwrap();
    let back = reconstruct(&FeatureVector(vec![0.0; space.rank()]), &space).unwrap();
    assert_eq!(back, space.mean_face());
}

#[test]
fn json_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (space, _) = build_eigenspace(&random_images(&mut rng, 4, 6), 0.9, None).unwrap();
    let text = polarface::persist::to_json(&space).unwrap();
    for key in ["\"dim\"", "\"side\"", "\"mean_face\"", "\"eigenvalues\"", "\"basis\"", "\"variance_keep\""] {
        assert!(text.contains(key), "missing {key}");
    }
    let back: EigenSpace = serde_json::from_str(&text).unwrap();
    assert_eq!(back, space);
    back.validate().unwrap();
}

proptest! {
    #[test]
    fn variance_accounting(seed in 0u64..200, keep in 0.05f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let imgs = random_images(&mut rng, 4, 8);
        let (full, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
        let (space, _) = build_eigenspace(&imgs, keep, None).unwrap();
        let total: f64 = full.eigenvalues().iter().sum();
        let kept: f64 = space.eigenvalues().iter().sum();
        prop_assert!(kept >= keep * total * (1.0 - 1e-12));
        // minimal: dropping the last eigenface falls short
        let short: f64 = space.eigenvalues()[..space.rank() - 1].iter().sum();
        prop_assert!(short < keep * total);
        prop_assert!(space.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(space.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn projection_is_affine(seed in 0u64..200, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let imgs = random_images(&mut rng, 4, 6);
        let (space, _) = build_eigenspace(&imgs, 1.0, None).unwrap();
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let mix: Vec<f64> = (0..16)
            .map(|i| a * x[i] + b * y[i] - (a + b - 1.0) * space.mean_face()[i])
            .collect();
        let lhs = space.project_vec(&mix).unwrap();
        let px = space.project_vec(&x).unwrap();
        let py = space.project_vec(&y).unwrap();
        for k in 0..space.rank() {
            prop_assert!((lhs.0[k] - (a * px.0[k] + b * py.0[k])).abs() <= 1e-9);
        }
    }
}

//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any fail.
//!
//! Run alone with `cargo test -p polarface --test acceptance`.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use polarface::eigenspace::build_eigenspace;
use polarface::logpolar::{best_column_shift, log_polar_fixed};
use polarface::mlp::{momentum_step, Gradient, MlpNetwork, TrainConfig, TrainState};
use polarface::pipeline::{
    emit_curves, ingest_dataset, run_evaluation, run_training, save_run, Arm, CurvePoint,
    EvalReport, PipelineConfig, RunConfig, CONFIG_FILE, DEFAULT_SPLIT_FRACTION, EIGENSPACE_FILE,
    MLP_FILE, REPORT_FILE, SPLIT_FILE,
};
use polarface::synth::CorpusSpec;
use polarface::{circular_column_shift, log_polar_transform, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{direct_covariance_eigen, face, finite_difference_gradient, max_relative_error};

type Outcome = Result<String, String>;

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    if t < limit {
        Ok(t)
    } else {
        Err(format!("took {t:.2?}, limit {limit:?}"))
    }
}

fn rotation_shift() -> Outcome {
    let start = Instant::now();
    let size = 129;
    let base = log_polar_transform(&face(3, size, 0.0, 1.0), 2).map_err(|e| e.to_string())?;
    let w = base.width() as i64;
    let mut worst_residual = 0.0f64;
    let mut worst_k = 0i64;
    for delta in [15.0, -15.0, 30.0, -30.0, 45.0, -45.0] {
        let rotated = log_polar_transform(&face(3, size, delta, 1.0), 2).unwrap();
        let expected = (w as f64 * delta / 360.0).round() as i64;
        let (k, residual) = best_column_shift(&base, &rotated);
        let k = if k > w / 2 { k - w } else { k };
        // cross-check the search against the explicit shift
        let direct = circular_column_shift(&base, k).mean_abs_diff(&rotated);
        if direct != residual {
            return Err(format!("Δ={delta}: search residual {residual} != direct {direct}"));
        }
        worst_residual = worst_residual.max(residual);
        worst_k = worst_k.max((k - expected).abs());
        if (k - expected).abs() > 1 || residual > 0.05 {
            return Err(format!(
                "Δ={delta}: k*={k}, expected {expected}, residual {residual:.4}"
            ));
        }
    }
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!(
        "S={w}, max |k*-k| = {worst_k}, max residual {worst_residual:.4}, {t:.2?}"
    ))
}

fn scale_normalization() -> Outcome {
    let start = Instant::now();
    let original = face(5, 100, 0.0, 1.0);
    let reference = log_polar_transform(&original, 2).map_err(|e| e.to_string())?;
    let side = reference.height();
    let mut worst = 0.0f64;
    for s in [0.9f64, 1.1, 2.0] {
        let size = (100.0 * s).round() as usize;
        let out = log_polar_fixed(&face(5, size, 0.0, 1.0), 2, side).map_err(|e| e.to_string())?;
        let mad = out.mean_abs_diff(&reference);
        worst = worst.max(mad);
        if mad > 0.1 {
            return Err(format!("s={s}: mean abs diff {mad:.4}"));
        }
    }
    let t = within(Duration::from_secs(5), start)?;
    Ok(format!("max mean abs diff {worst:.4}, {t:.2?}"))
}

fn snapshot_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut val_err, mut vec_err, mut ortho_err) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..20 {
        let side = rng.random_range(2..=8);
        let p = rng.random_range(2..=10);
        let imgs: Vec<GrayImage> = (0..p)
            .map(|_| GrayImage::from_fn(side, side, |_, _| rng.random_range(0.0..1.0)))
            .collect();
        let (space, _) = build_eigenspace(&imgs, 1.0, None).map_err(|e| e.to_string())?;
        let b = space.basis();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let d: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
                ortho_err = ortho_err.max((d - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let vectors: Vec<Vec<f64>> = imgs.iter().map(|i| i.pixels().to_vec()).collect();
        let (values, directs) = direct_covariance_eigen(&vectors);
        for k in 0..space.rank() {
            let snapshot = space.eigenvalues()[k] / p as f64;
            val_err = val_err.max((snapshot - values[k]).abs() / values[k].abs());
            let dot: f64 = b[k].iter().zip(&directs[k]).map(|(a, b)| a * b).sum();
            for (a, d) in b[k].iter().zip(&directs[k]) {
                vec_err = vec_err.max((a - dot.signum() * d).abs());
            }
        }
        if val_err > 1e-8 || vec_err > 1e-8 || ortho_err > 1e-8 {
            return Err(format!(
                "trial {trial}: eigenvalue rel {val_err:.2e}, eigenvector {vec_err:.2e}, orthonormality {ortho_err:.2e}"
            ));
        }
    }
    let t = within(Duration::from_secs(2), start)?;
    Ok(format!(
        "20 instances, eigenvalue rel {val_err:.1e}, eigenvector {vec_err:.1e}, orthonormality {ortho_err:.1e}, {t:.2?}"
    ))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let net = MlpNetwork::init(&[3, 4, 4, 4, 2], 100 + trial).map_err(|e| e.to_string())?;
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ts: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let analytic = net.batch_gradient(&xs, &ts).map_err(|e| e.to_string())?.flatten();
        let numeric = finite_difference_gradient(&net, &xs, &ts, 1e-5);
        let err = max_relative_error(&analytic, &numeric, 1e-8);
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("trial {trial}: relative error {err:.2e}"));
        }
    }
    let t = within(Duration::from_secs(2), start)?;
    Ok(format!("10 trials, max relative error {worst:.1e}, {t:.2?}"))
}

fn momentum_endpoints() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = MlpNetwork::init(&[3, 5, 2], 4).unwrap();
    let mut checked = 0usize;
    for _ in 0..5 {
        let mut grad = Gradient::zeros_like(&net);
        let mut prev = Gradient::zeros_like(&net);
        for g in [&mut grad, &mut prev] {
            for l in &mut g.0 {
                for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                    *w = rng.random_range(-1.0..1.0);
                }
            }
        }
        let lr = rng.random_range(0.001..0.5);
        for mc in [0.0, 1.0] {
            let cfg = TrainConfig { learning_rate: lr, momentum: mc, ..TrainConfig::default() };
            let mut state = TrainState { prev_delta: prev.clone(), epoch: 0, mse_history: vec![] };
            let mut n = net.clone();
            momentum_step(&mut n, &grad, &mut state, &cfg);
            let applied: Vec<f64> = n
                .layers()
                .iter()
                .zip(net.layers())
                .flat_map(|(a, b)| {
                    let w = a.weights.iter().zip(&b.weights).map(|(x, y)| x - y);
                    let bias = a.biases.iter().zip(&b.biases).map(|(x, y)| x - y);
                    w.chain(bias).collect::<Vec<_>>()
                })
                .collect();
            let want: Vec<f64> = if mc == 0.0 {
                grad.flatten().iter().map(|g| -(lr * g)).collect()
            } else {
                prev.flatten()
            };
            for (k, (d, w)) in state.prev_delta.flatten().iter().zip(&want).enumerate() {
                if d.to_bits() != w.to_bits() {
                    return Err(format!("mc={mc}: Δ[{k}] = {d:e}, expected {w:e}"));
                }
                // the weight moved by Δ up to one rounding of the addition
                if (applied[k] - w).abs() > 1e-15 * (1.0 + w.abs()) {
                    return Err(format!("mc={mc}: weight {k} moved by {:e}", applied[k]));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} components bit-equal"))
}

struct E2e {
    polar: EvalReport,
    plain: EvalReport,
    files: Vec<(String, Vec<u8>)>,
    elapsed: Duration,
}

fn desk_run(root: &Path) -> Result<E2e, String> {
    let start = Instant::now();
    let data = root.join("data");
    CorpusSpec::default().write(&data).map_err(|e| e.to_string())?;
    let ds = ingest_dataset(&data, DEFAULT_SPLIT_FRACTION, 1).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for polar in [true, false] {
        let cfg = PipelineConfig { polar, ..PipelineConfig::default() };
        let model = run_training(&ds, &cfg).map_err(|e| e.to_string())?;
        let report = run_evaluation(&ds, &model, None, None).map_err(|e| e.to_string())?;
        let arm = Arm::from_polar(polar);
        let dir = root.join(arm.to_string());
        let rc = RunConfig {
            data_root: None,
            split_fraction: DEFAULT_SPLIT_FRACTION,
            split_seed: 1,
            pipeline: cfg,
            normalizer: model.normalizer,
        };
        save_run(&dir, &ds, &rc, &model).map_err(|e| e.to_string())?;
        let curve = emit_curves(&[CurvePoint::new(arm, report.total, &report)]);
        fs::write(dir.join(REPORT_FILE), curve).map_err(|e| e.to_string())?;
        for name in [EIGENSPACE_FILE, MLP_FILE, SPLIT_FILE, CONFIG_FILE, REPORT_FILE] {
            let bytes = fs::read(dir.join(name)).map_err(|e| e.to_string())?;
            files.push((format!("{arm}/{name}"), bytes));
        }
        reports.push(report);
    }
    let plain = reports.pop().unwrap();
    let polar = reports.pop().unwrap();
    Ok(E2e { polar, plain, files, elapsed: start.elapsed() })
}

fn end_to_end(run: &E2e) -> Outcome {
    let (p, q) = (run.polar.recognition_rate, run.plain.recognition_rate);
    let detail = format!(
        "polar rr {p:.4} ({}/{}), plain rr {q:.4} ({}/{}), {:.2?}",
        run.polar.correct, run.polar.total, run.plain.correct, run.plain.total, run.elapsed
    );
    if p < 0.95 {
        return Err(format!("polar below 0.95: {detail}"));
    }
    if p < q {
        return Err(format!("polar below plain: {detail}"));
    }
    if run.elapsed >= Duration::from_secs(120) {
        return Err(format!("too slow: {detail}"));
    }
    Ok(detail)
}

fn determinism(a: &E2e, b: &E2e) -> Outcome {
    if a.files.len() != b.files.len() {
        return Err("different file sets".into());
    }
    for ((name, x), (_, y)) in a.files.iter().zip(&b.files) {
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
    }
    if a.polar != b.polar || a.plain != b.plain {
        return Err("reports differ between runs".into());
    }
    let bytes: usize = a.files.iter().map(|(_, x)| x.len()).sum();
    Ok(format!("{} files ({bytes} bytes) and both reports identical", a.files.len()))
}

fn report_arithmetic(reports: &[&EvalReport]) -> Outcome {
    for (k, r) in reports.iter().enumerate() {
        if r.correct + r.rejected + r.misclassified != r.total {
            return Err(format!("report {k}: tallies do not sum to {}", r.total));
        }
        if (r.false_rejection_rate - (1.0 - r.recognition_rate)).abs() > 1e-12 {
            return Err(format!("report {k}: FRR {} vs rr {}", r.false_rejection_rate, r.recognition_rate));
        }
        if !r.is_consistent() {
            return Err(format!("report {k}: inconsistent {r:?}"));
        }
    }
    Ok(format!("{} reports consistent", reports.len()))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(cause) => {
                failures += 1;
                println!("FAIL criterion {n} ({name}): {cause}");
            }
        }
    };
    report(1, "rotation to column shift", rotation_shift());
    report(2, "scale normalization", scale_normalization());
    report(3, "snapshot PCA oracle", snapshot_oracle());
    report(4, "gradient check", gradient_check());
    report(5, "momentum endpoints", momentum_endpoints());

    // same location both times: split.csv records sample paths
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path().join("desk");
    let first = desk_run(&root);
    let _ = fs::remove_dir_all(&root);
    let second = desk_run(&root);
    match (&first, &second) {
        (Ok(a), Ok(b)) => {
            report(6, "end-to-end desk benchmark", end_to_end(a));
            report(7, "determinism", determinism(a, b));
            report(
                8,
                "report arithmetic",
                report_arithmetic(&[&a.polar, &a.plain, &b.polar, &b.plain]),
            );
        }
        _ => {
            let cause = first.err().or(second.err()).unwrap_or_default();
            report(6, "end-to-end desk benchmark", Err(cause.clone()));
            report(7, "determinism", Err(cause.clone()));
            report(8, "report arithmetic", Err(cause));
        }
    }

    if failures == 0 {
        println!("acceptance: all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 8 criteria failed");
        ExitCode::FAILURE
    }
}

//! Runs both arms of the desk-scale synthetic benchmark and prints the rates.
//!
//!     cargo run --release -p polarface --example desk_benchmark

use std::time::Instant;

use polarface::pipeline::{ingest_dataset, run_evaluation, run_training, PipelineConfig};
use polarface::synth::CorpusSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("polarface-desk-benchmark");
    let _ = std::fs::remove_dir_all(&dir);
    let spec = CorpusSpec::default();
    spec.write(&dir)?;
    let ds = ingest_dataset(&dir, 0.56, 1)?;
    for polar in [true, false] {
        let t = Instant::now();
        let cfg = PipelineConfig {
            polar,
            ..PipelineConfig::default()
        };
        let model = run_training(&ds, &cfg)?;
        let report = run_evaluation(&ds, &model, None, None)?;
        println!(
            "polar={polar} U={} epochs={} mse={:.3e} rr={:.4} ({}/{}) in {:.1?}",
            model.space.rank(),
            model.state.epoch,
            model.state.final_mse().unwrap_or(f64::NAN),
            report.recognition_rate,
            report.correct,
            report.total,
            t.elapsed()
        );
    }
    Ok(())
}

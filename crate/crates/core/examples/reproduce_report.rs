//! Full reproduction run: every table, curve and the structured report,
//! written to a directory, followed by the largest deviations from the
//! published values.
//!
//! Usage: `cargo run --example reproduce_report [DATA_DIR [OUT_DIR]]`.
//! Without a data directory a synthetic dataset is generated first.

use std::path::PathBuf;

use replimarket::dataset::DatasetPaths;
use replimarket::pipeline::{run_report, run_synth, RunConfig};
use replimarket::synth::SynthConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let data = args.next().map(PathBuf::from);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("replimarket-report"));
    let inputs = match data {
        Some(dir) => DatasetPaths::in_dir(&dir),
        None => run_synth(
            &SynthConfig {
                markets: 103,
                ..SynthConfig::default()
            },
            &out.join("synthetic-input"),
        )?,
    };
    let rep = run_report(&RunConfig::new(inputs, &out))?;
    println!("wrote outputs to {}", out.display());

    let mut worst: Vec<_> = rep.discrepancies.iter().filter(|d| d.delta.is_some()).collect();
    worst.sort_by(|a, b| {
        let rel = |d: &replimarket::report::Discrepancy| (d.delta.unwrap() / d.published).abs();
        rel(b).total_cmp(&rel(a))
    });
    for d in worst.iter().take(10) {
        println!("{:<40} published {:>10.4} computed {:>10.4}", d.key, d.published, d.computed.unwrap());
    }
    Ok(())
}

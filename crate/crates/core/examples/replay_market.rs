//! Replay recorded trades either by taking the recorded prices or by pushing
//! the recorded quantities through a fresh market maker.
//!
//! Usage: `cargo run --example replay_market [DATA_DIR]`. Without a
//! directory a synthetic dataset is used.

use std::path::PathBuf;

use replimarket::dataset::{load_dataset, DatasetPaths, LoadOptions};
use replimarket::lmsr::{replay, ReplayMode};
use replimarket::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = match std::env::args().nth(1).map(PathBuf::from) {
        Some(dir) => load_dataset(&DatasetPaths::in_dir(&dir), &LoadOptions::default())?.strict()?,
        None => generate(&SynthConfig::default())?,
    };
    for f in ds.findings().iter().take(5) {
        let recorded = replay(&ds, &f.finding_id, ReplayMode::PriceTaking)?;
        let line = match replay(&ds, &f.finding_id, ReplayMode::Simulated { liquidity_b: 100.0 }) {
            Ok(sim) => {
                let gap = recorded
                    .prices()
                    .iter()
                    .zip(sim.prices())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                format!("simulated final {:.4}, max gap {gap:.2e}", sim.final_price())
            }
            Err(e) => format!("no simulation: {e}"),
        };
        println!(
            "{} ({} trades): final {:.4}; {line}",
            f.finding_id,
            recorded.points.len(),
            recorded.final_price()
        );
    }
    Ok(())
}

//! Score every aggregation method against outcomes and run the comparison
//! tests between market and survey forecasts.

use replimarket::aggregate::{aggregate_all, AggregateConfig};
use replimarket::evaluate::{score, summarize};
use replimarket::report::hypothesis_tests;
use replimarket::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate(&SynthConfig {
        markets: 40,
        ..SynthConfig::default()
    })?;
    let table = aggregate_all(&ds, &AggregateConfig::default());
    let scores = score(&table.forecasts, &ds, 0.5)?;

    for s in summarize(&scores, &ds) {
        println!("{} ({} findings, {} replicated)", s.group, s.n_findings, s.n_replicated);
        for (m, ms) in &s.methods {
            println!(
                "  {:<20} mean {:.3}  correct {:>2}/{}  MAE {:.3}",
                m.as_str(),
                ms.mean_forecast,
                ms.n_correct,
                ms.n_scored,
                ms.mae
            );
        }
    }

    let tests = hypothesis_tests(&scores, false);
    println!("{}", serde_json::to_string_pretty(&tests)?);
    Ok(())
}

//! Regress replication outcomes on whether the original p-value was at or
//! below 0.005.

use replimarket::evaluate::pvalue_regression;
use replimarket::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate(&SynthConfig {
        markets: 103,
        ..SynthConfig::default()
    })?;
    let a = pvalue_regression(&ds)?;
    println!("intercept {:.4} (SE {:.4})", a.fit.intercept, a.fit.se_intercept);
    println!(
        "slope     {:.4} (SE {:.4}, p = {:.2e})",
        a.fit.slope, a.fit.se_slope, a.slope_test.p_value
    );
    println!("R^2 {:.4}, n = {}", a.fit.r_squared, a.fit.n);
    for r in &a.rates {
        println!("{:<12} {}/{} replicated ({:.0}%)", r.category.as_str(), r.n_replicated, r.n, 100.0 * r.rate);
    }
    Ok(())
}

//! Pool survey answers with each aggregation rule and compare them with the
//! final market price.

use replimarket::aggregate::{aggregate_all, pool_mean, pool_median, pool_voting, pool_weighted, AggregateConfig, Method};
use replimarket::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beliefs = [0.2, 0.4, 0.9];
    println!(
        "{beliefs:?}: mean {:.3}, median {:.3}, voting {:.3}",
        pool_mean(&beliefs).unwrap(),
        pool_median(&beliefs).unwrap(),
        pool_voting(&beliefs, 0.5).unwrap()
    );
    println!("weighted (0.8 x3, 0.2 x1): {:.3}", pool_weighted(&[(0.8, 3.0), (0.2, 1.0)]).unwrap());

    let ds = generate(&SynthConfig::default())?;
    let table = aggregate_all(&ds, &AggregateConfig::default());
    print!("{:<10}", "finding");
    for m in Method::ALL {
        print!("{:>22}", m.as_str());
    }
    println!();
    for f in ds.findings() {
        print!("{:<10}", f.finding_id);
        for m in Method::ALL {
            match table.get(&f.finding_id, m) {
                Some(a) => print!("{:>22.3}", a.value),
                None => print!("{:>22}", "NA"),
            }
        }
        println!();
    }
    for failure in &table.failures {
        println!("{} {}: {}", failure.finding_id, failure.method, failure.reason);
    }
    Ok(())
}

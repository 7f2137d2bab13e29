//! Mean absolute error of market prices as trading proceeds, smoothed with
//! LOESS, and how soon most of the error reduction happens.

use replimarket::dynamics::{
    hour_grid, late_trade_smoothing, loess_fit, mean_error_curve, reduction_milestone, trade_grid, Axis, LoessConfig,
    ReductionBase,
};
use replimarket::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate(&SynthConfig {
        markets: 30,
        ..SynthConfig::default()
    })?;
    let cfg = LoessConfig::default();
    for (axis, grid) in [(Axis::TradeIndex, trade_grid(&ds)), (Axis::HoursSinceOpen, hour_grid(&ds))] {
        let curve = loess_fit(&mean_error_curve(&ds, axis, &grid)?, &cfg)?;
        let xy = curve.xy();
        println!("{axis:?}: {} grid points, smoothed error {:.3} -> {:.3}", xy.len(), xy[0].1, xy[xy.len() - 1].1);
        for fraction in [0.5, 0.9] {
            match reduction_milestone(&xy, fraction, ReductionBase::Minimum) {
                Ok(m) => println!("  {:.0}% of the reduction by x = {:.1}", fraction * 100.0, m.x_at_fraction),
                Err(e) => println!("  {:.0}%: {e}", fraction * 100.0),
            }
        }
    }
    let late = late_trade_smoothing(&ds, 168.0)?;
    println!(
        "smoothing trades after one week: t = {:.3}, p = {:.3}",
        late.test.statistic, late.test.p_value
    );
    Ok(())
}

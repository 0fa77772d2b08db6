//! Paired lower-bound probe: least squares over the tree class with
//! (2 - eps)-stable errors versus Gaussian errors on the same seeds.
//!
//!     cargo run --release --example lower_bound

use shaperate::experiments::{run_paired_lower_bound, LowerBoundPlan};

fn main() -> shaperate::Result<()> {
    let plan = LowerBoundPlan::new(0.5, 0.25, (9..=13).map(|k| 1 << k).collect(), 300, 0x5eed);
    let probe = run_paired_lower_bound(&plan)?;
    println!("levels {:?}, deep enough {}", probe.max_level, probe.depth_sufficient);
    for (name, curve) in [("heavy", &probe.heavy), ("light", &probe.light)] {
        let means: Vec<String> = curve.summaries.iter().map(|m| format!("{m:.2e}")).collect();
        println!("{name}: mean losses [{}], slope {:.3}", means.join(", "), curve.slope.unwrap());
    }
    println!(
        "slope gap {:.3}, 90% interval [{:.3}, {:.3}]; heavy slower by 0.05: {}",
        probe.slope_gap.estimate,
        probe.slope_gap.lower,
        probe.slope_gap.upper,
        probe.heavy_is_slower(0.05)
    );
    println!("upper-bound slope for gamma = 1/2: {:.3}", probe.predicted_upper_slope);
    Ok(())
}

//! Median squared loss of the isotonic LSE across sample sizes, Gaussian
//! versus Student-t(2.5) errors.
//!
//!     cargo run --release --example risk_curve

use shaperate::domain::SignalSpec;
use shaperate::experiments::{run_risk_curve, Estimator, ExperimentPlan};
use shaperate::noise::ErrorLaw;

fn main() -> shaperate::Result<()> {
    let n_grid: Vec<usize> = (7..=12).map(|k| 1 << k).collect();
    for law in [ErrorLaw::gaussian(1.0), ErrorLaw::student_t(2.5, 1.0)] {
        let plan = ExperimentPlan::new(Estimator::Isotonic, SignalSpec::identity(), law, n_grid.clone(), 100, 7);
        let curve = run_risk_curve(&plan)?;
        println!("{law:?}");
        for (k, n) in curve.n_grid.iter().enumerate() {
            println!(
                "  n = {n:>5}: median {:.5}  iqr [{:.5}, {:.5}]",
                curve.summaries[k], curve.iqr_lo[k], curve.iqr_hi[k]
            );
        }
        println!("  slope {:.3} +- {:.3} (n^-2/3 gives -0.667)", curve.slope.unwrap(), curve.slope_stderr.unwrap());
    }
    Ok(())
}

//! Sup-norm and boundary value of the isotonic and convex LSEs across n.
//!
//!     cargo run --release --example boundedness

use shaperate::domain::SignalSpec;
use shaperate::experiments::{run_boundedness_probe, BootstrapConfig, Estimator, ExperimentPlan};
use shaperate::noise::ErrorLaw;

fn main() -> shaperate::Result<()> {
    for estimator in [Estimator::Isotonic, Estimator::Convex] {
        let plan = ExperimentPlan::new(
            estimator,
            SignalSpec::linear(0.0, 1.0),
            ErrorLaw::student_t(3.0, 1.0),
            (7..=12).map(|k| 1 << k).collect(),
            100,
            5,
        );
        let r = run_boundedness_probe(&plan, BootstrapConfig::default())?;
        println!("{estimator:?}");
        println!("  median sup |f_hat|: {:.3?}", r.median_sup_norm);
        println!("  median |f_hat(0)|:  {:.3?}", r.median_abs_at_zero);
        println!("  trend slopes {:.3} / {:.3}, bounded: {}", r.sup_trend.estimate, r.zero_trend.estimate, r.bounded(0.0));
    }
    Ok(())
}

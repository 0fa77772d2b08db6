//! Oracle inequality audit: loss of the LSE against the best m-piece
//! approximation error plus m log^2 n / n, for a two-piece truth.
//!
//!     cargo run --release --example oracle_audit

use shaperate::domain::SignalSpec;
use shaperate::experiments::{run_oracle_audit, BootstrapConfig, Estimator, ExperimentPlan};
use shaperate::noise::ErrorLaw;

fn main() -> shaperate::Result<()> {
    let f0 = SignalSpec::step_train(vec![0.4], vec![0.0, 1.0])?;
    let plan = ExperimentPlan::new(
        Estimator::Isotonic,
        f0,
        ErrorLaw::student_t(2.5, 1.0),
        (7..=11).map(|k| 1 << k).collect(),
        100,
        11,
    );
    let audit = run_oracle_audit(&plan, 6, BootstrapConfig::default())?;
    let approx: Vec<String> = audit.approx_error_sq.iter().map(|e| format!("{e:.2e}")).collect();
    println!("approximation errors by m: [{}]", approx.join(", "));
    for row in &audit.rows {
        println!(
            "n = {:>5}: median loss {:.5}, min rhs {:.5} (m = {}), ratio quartiles {:.3} / {:.3} / {:.3}",
            row.n, row.lhs_median, row.rhs_min, row.argmin_m, row.ratio_q25, row.ratio_median, row.ratio_q75
        );
    }
    println!(
        "median-ratio slope {:.3}, bounded: {}",
        audit.ratio_trend.estimate,
        audit.ratio_bounded()
    );

    let cauchy_like = ExperimentPlan { law: ErrorLaw::pareto_eta(1.0), ..plan };
    if let Err(e) = run_oracle_audit(&cauchy_like, 6, BootstrapConfig::default()) {
        println!("pareto_eta errors: {e}");
    }
    Ok(())
}

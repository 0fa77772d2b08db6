//! Envelope profiles of the built-in models, the fitted growth exponents,
//! and the tree class used for lower bounds.
//!
//!     cargo run --release --example envelopes

use shaperate::envelopes::{
    build_tree_class, envelope_norm, envelope_norm_quadrature, envelope_profile, predicted_rate_exponent,
    tree_envelope_check, tree_is_nested, ChildSelector, EnvelopeModel,
};

fn main() -> shaperate::Result<()> {
    let deltas: Vec<f64> = (0..=12).map(|k| 10f64.powf(-1.0 - k as f64 / 4.0)).collect();
    println!("{:<20} {:>9} {:>9} {:>10}", "model", "gamma", "tau", "rate exp");
    for model in EnvelopeModel::builtin() {
        let p = envelope_profile(model, &deltas)?;
        println!(
            "{:<20} {:>9.4} {:>9.4} {:>10.4}",
            model.name(),
            p.gamma_hat,
            p.log_correction,
            predicted_rate_exponent(p.gamma_hat)?
        );
    }

    let iso = EnvelopeModel::isotonic(1.0);
    let d = 1e-3;
    println!(
        "isotonic at delta = {d}: closed form {:.10}, quadrature {:.10}",
        envelope_norm(iso, d)?,
        envelope_norm_quadrature(iso, d, 10_000)?
    );

    for gamma in [0.25, 0.5, 0.75] {
        let tree = build_tree_class(gamma, 8, ChildSelector::Seeded(7))?;
        let report = tree_envelope_check(&tree, &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])?;
        println!(
            "tree gamma = {gamma}: {} members, nested {}, max ||F|| / delta^gamma = {:.4}",
            tree.num_members(),
            tree_is_nested(&tree),
            report.max_ratio
        );
    }
    Ok(())
}

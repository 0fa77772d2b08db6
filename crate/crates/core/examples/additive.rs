//! Additive model Y = f(X) + h(Z) + noise with isotonic f, for each of the
//! three H classes.
//!
//!     cargo run --release --example additive

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shaperate::additive::{
    fit_additive, partial_residual_audit, AdditiveOptions, BivariateSample, HClass, HMember, Shape,
};
use shaperate::noise::ErrorLaw;

fn main() -> shaperate::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1000;
    let law = ErrorLaw::student_t(2.5, 0.3);
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let zs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    // f0 is a unit step at 1/2, h0(z) = 0.6 (z - 1/2).
    let ys: Vec<f64> = xs
        .iter()
        .zip(&zs)
        .map(|(&x, &z)| f64::from(u8::from(x > 0.5)) + 0.6 * (z - 0.5) + law.draw(&mut rng))
        .collect();
    let sample = BivariateSample::new(xs, zs, ys)?;

    let classes = [
        HClass::AffineBounded { bound: 1.0 },
        HClass::BinnedSieve { bins: 8, bound: 1.0 },
        HClass::CenteredIntervalIndicators { grid: 32 },
    ];
    for class in classes {
        let fit = fit_additive(&sample, Shape::Isotonic, class, AdditiveOptions::default())?;
        let h = match &fit.h_hat {
            HMember::Affine { beta, .. } => format!("beta = {beta:.3}"),
            HMember::Binned { values, .. } => format!("{} bins", values.len()),
            HMember::Interval { lo, hi, .. } if lo < hi => format!("interval [{lo:.3}, {hi:.3}]"),
            HMember::Interval { .. } => "the zero member".into(),
        };
        println!(
            "{class:?}: rss {:.3} after {} cycles (converged {}), {h}, partial-residual gap {:.2e}",
            fit.objective(),
            fit.iterations(),
            fit.converged,
            partial_residual_audit(&sample, &fit)?
        );
    }
    Ok(())
}

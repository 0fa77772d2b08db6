//! Convex least squares by the active-set solver, with the brute-force
//! oracle on a small sample and the cumulative-sum audit on a large one.
//!
//!     cargo run --release --example convex

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shaperate::convex::{brute_force_convex, characterization_audit, fit_convex};
use shaperate::domain::SortedSample;

fn noisy(rng: &mut ChaCha8Rng, n: usize) -> SortedSample {
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| 4.0 * (x - 0.3f64).powi(2) + 0.2 * (rng.random::<f64>() - 0.5))
        .collect();
    SortedSample::new(&xs, &ys).unwrap()
}

fn main() -> shaperate::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let small = noisy(&mut rng, 10);
    let fast = fit_convex(&small)?;
    let slow = brute_force_convex(&small)?;
    let gap = fast.fitted().iter().zip(slow.fitted()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("n = 10: active set vs enumeration, max gap {gap:.2e}");

    let big = noisy(&mut rng, 2000);
    let fit = fit_convex(&big)?;
    let audit = characterization_audit(&big, &fit)?;
    println!(
        "n = 2000: {} kinks, residual norm {:.4}",
        fit.kinks().len(),
        fit.residual_norm()
    );
    println!(
        "  audit: min slack {:.2e}, kink gap {:.2e}, endpoint gap {:.2e}, passes {}",
        audit.max_violation,
        audit.max_kink_gap,
        audit.endpoint_gap,
        audit.passes(1e-8)
    );
    let ext = fit.extension();
    println!("  extension knots {:?}", &ext.knots()[..ext.knots().len().min(6)]);
    Ok(())
}

//! Isotonic least squares on a noisy monotone signal, checked against the
//! min-max formula.
//!
//!     cargo run --release --example isotonic

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shaperate::domain::{l2_loss, SignalSpec, SortedSample};
use shaperate::isotonic::{fit_isotonic, minmax_gap};

fn main() -> shaperate::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200;
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x * x + 0.3 * (rng.random::<f64>() - 0.5)).collect();

    let sample = SortedSample::new(&xs, &ys)?;
    let fit = fit_isotonic(&sample)?;
    println!("n = {n}, {} blocks", fit.blocks().len());
    for b in fit.blocks().iter().take(5) {
        println!("  [{:>3}, {:>3}] mean {:.4}", b.start, b.end, b.mean);
    }
    println!("max gap to the min-max formula: {:.2e}", minmax_gap(&sample, fit.fitted())?);

    let truth = SignalSpec::polynomial(vec![0.0, 0.0, 1.0])?;
    println!("||f_hat - f0||^2 = {:.5}", l2_loss(fit.extension(), &truth));
    Ok(())
}

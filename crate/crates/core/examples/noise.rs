//! Error laws: tail checks against the survival functions and L_{p,1} norms.
//!
//!     cargo run --release --example noise

use shaperate::noise::ErrorLaw;

fn main() -> shaperate::Result<()> {
    let laws = [
        ErrorLaw::gaussian(1.0),
        ErrorLaw::student_t(2.5, 1.0),
        ErrorLaw::sym_stable(1.75, 1.0),
        ErrorLaw::pareto_eta(1.0),
    ];
    let n = 200_000;
    for law in laws {
        let xs = law.sample(n, 42)?;
        print!("{law:?}\n  P(|e| > t), empirical / exact:");
        for t in [0.5, 1.0, 2.0, 5.0] {
            let hat = xs.iter().filter(|x| x.abs() > t).count() as f64 / n as f64;
            print!("  {t}: {hat:.4}/{:.4}", law.survival(t));
        }
        println!();
        println!(
            "  tail exponent {:?}, L_2,1 = {}, L_1,1 = {}",
            law.tail_exponent(),
            law.lp1_norm(2.0)?,
            law.lp1_norm(1.0)?
        );
    }
    Ok(())
}

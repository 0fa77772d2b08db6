use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shaperate::convex::{brute_force_convex, characterization_audit, fit_convex};
use shaperate::domain::SortedSample;

fn random_sample(rng: &mut ChaCha8Rng, n: usize) -> SortedSample {
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    SortedSample::new(&xs, &ys).unwrap()
}

#[test]
fn active_set_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let n = rng.random_range(3..=12);
        let s = random_sample(&mut rng, n);
        let fast = fit_convex(&s).unwrap();
        let slow = brute_force_convex(&s).unwrap();
        let gap = fast
            .fitted()
            .iter()
            .zip(slow.fitted())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-8, "n = {n}: gap {gap}");
    }
}

#[test]
fn audit_holds_on_larger_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [20, 100, 500] {
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (x - 0.5f64).powi(2) * 3.0 + rng.random::<f64>() - 0.5)
            .collect();
        let s = SortedSample::new(&xs, &ys).unwrap();
        let fit = fit_convex(&s).unwrap();
        let audit = characterization_audit(&s, &fit).unwrap();
        assert!(audit.passes(1e-8), "n = {n}: {audit:?}");
        assert!(fit.extension().is_convex());
    }
}

proptest! {
    #[test]
    fn projection_inequality_against_convex_competitors(
        ys in proptest::collection::vec(-3.0f64..3.0, 4..30),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in 0.0f64..5.0,
        knot in 0.0f64..1.0,
    ) {
        let n = ys.len();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let s = SortedSample::from_sorted(xs.clone(), ys.clone()).unwrap();
        let fit = fit_convex(&s).unwrap();
        let f = fit.fitted();
        // g(x) = a + b x + c (x - knot)_+ is convex.
        let inner: f64 = (0..n)
            .map(|i| {
                let g = a + b * xs[i] + c * (xs[i] - knot).max(0.0);
                (ys[i] - f[i]) * (g - f[i])
            })
            .sum();
        prop_assert!(inner <= 1e-9, "inner product {}", inner);
    }

    #[test]
    fn convex_fit_is_translation_equivariant(
        ys in proptest::collection::vec(-3.0f64..3.0, 3..25),
        shift in -5.0f64..5.0,
    ) {
        let n = ys.len();
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let base = fit_convex(&SortedSample::from_sorted(xs.clone(), ys.clone()).unwrap()).unwrap();
        let moved: Vec<f64> = ys.iter().map(|y| y + shift).collect();
        let other = fit_convex(&SortedSample::from_sorted(xs, moved).unwrap()).unwrap();
        for (u, v) in base.fitted().iter().zip(other.fitted()) {
            prop_assert!((u + shift - v).abs() < 1e-9);
        }
    }
}

//! Exact squared L2(P) distances on [0, 1] with P uniform.

use super::function::Piecewise;
use crate::numeric::gl16;

/// Visits every segment of the common refinement of the partitions of `f`
/// and `g`, passing `(a, b, piece of f, piece of g)`.
pub fn for_each_merged_segment<F, G>(f: &F, g: &G, mut visit: impl FnMut(f64, f64, usize, usize))
where
    F: Piecewise + ?Sized,
    G: Piecewise + ?Sized,
{
    let (nf, ng) = (f.num_pieces(), g.num_pieces());
    let (mut i, mut j) = (0, 0);
    let mut a = 0.0;
    while i < nf && j < ng {
        let fe = f.boundary(i + 1);
        let ge = g.boundary(j + 1);
        let b = fe.min(ge);
        if b > a {
            visit(a, b, i, j);
            a = b;
        }
        if fe <= b {
            i += 1;
        }
        if ge <= b {
            j += 1;
        }
    }
}

/// `∫_a^b d(x)^2 dx` for a polynomial `d` of degree ≤ 2 given by its
/// values at `a`, the midpoint and `b`.
pub(crate) fn quadratic_square_integral(a: f64, b: f64, da: f64, dm: f64, db: f64) -> f64 {
    let h = 0.5 * (b - a);
    // d(m + u) = c0 + c1 u + c2 u^2 on u ∈ [-h, h]
    let c0 = dm;
    let c1 = (db - da) / (2.0 * h);
    let c2 = (da + db - 2.0 * dm) / (2.0 * h * h);
    let h2 = h * h;
    2.0 * h * (c0 * c0 + h2 * (c1 * c1 + 2.0 * c0 * c2) / 3.0 + h2 * h2 * c2 * c2 / 5.0)
}

/// Squared L2(P) distance `∫_0^1 (f - g)^2 dx`.
///
/// Closed form on every merged segment where both pieces are polynomials of
/// degree ≤ 2; 16-node Gauss–Legendre on the remaining segments.
pub fn l2_loss<F, G>(f: &F, g: &G) -> f64
where
    F: Piecewise + ?Sized,
    G: Piecewise + ?Sized,
{
    let rule = gl16();
    let mut total = 0.0;
    for_each_merged_segment(f, g, |a, b, i, j| {
        if f.piece_degree(i) <= 2 && g.piece_degree(j) <= 2 {
            let m = 0.5 * (a + b);
            let d = |x| f.eval_piece(i, x) - g.eval_piece(j, x);
            total += quadratic_square_integral(a, b, d(a), d(m), d(b));
        } else {
            total += rule.integrate(a, b, |x| {
                let d = f.eval_piece(i, x) - g.eval_piece(j, x);
                d * d
            });
        }
    });
    total.max(0.0)
}

/// Squared L2(P) norm of `f`.
pub fn l2_norm_sq<F: Piecewise + ?Sized>(f: &F) -> f64 {
    l2_loss(f, &Zero)
}

/// The zero function, as a one-piece polynomial.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Piecewise for Zero {
    fn num_pieces(&self) -> usize {
        1
    }
    fn boundary(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            1.0
        }
    }
    fn eval_piece(&self, _piece: usize, _x: f64) -> f64 {
        0.0
    }
    fn piece_degree(&self, _piece: usize) -> usize {
        0
    }
    fn piece_at(&self, _x: f64) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{PiecewiseLinearFunction, SignalSpec, StepFunction};

    #[test]
    fn half_constant_against_identity() {
        let f = StepFunction::constant(0.5);
        let loss = l2_loss(&f, &SignalSpec::identity());
        assert!((loss - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn identical_functions_have_zero_loss() {
        let f = PiecewiseLinearFunction::affine(0.0, 1.0);
        assert!(l2_loss(&f, &SignalSpec::identity()) < 1e-30);
        let s = StepFunction::new(vec![0.3, 1.0], vec![1.0, 2.0]).unwrap();
        let g = SignalSpec::step_train(vec![0.3], vec![1.0, 2.0]).unwrap();
        assert_eq!(l2_loss(&s, &g), 0.0);
    }

    #[test]
    fn half_mass_indicator() {
        let f = StepFunction::new(vec![0.5, 1.0], vec![0.0, 1.0]).unwrap();
        assert!((l2_loss(&f, &SignalSpec::constant(0.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn high_degree_falls_back_to_quadrature() {
        // ∫ x^6 = 1/7
        let g = SignalSpec::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((l2_norm_sq(&g) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_difference_is_exact() {
        // ∫ (x^2 - x)^2 = 1/30
        let g = SignalSpec::polynomial(vec![0.0, -1.0, 1.0]).unwrap();
        assert!((l2_norm_sq(&g) - 1.0 / 30.0).abs() < 1e-15);
    }
}

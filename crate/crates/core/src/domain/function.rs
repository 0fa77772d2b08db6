use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const CONVEXITY_TOL: f64 = 1e-10;

/// A function on [0, 1] given piece by piece, each piece a polynomial.
///
/// Piece `i` covers `[boundary(i), boundary(i + 1)]`; `boundary(0) = 0` and
/// `boundary(num_pieces()) = 1`. Which piece owns a shared boundary point is
/// decided by [`Piecewise::eval`]; integrals never depend on it.
pub trait Piecewise {
    fn num_pieces(&self) -> usize;

    fn boundary(&self, i: usize) -> f64;

    /// Evaluates the polynomial of piece `i` (valid on the closed piece).
    fn eval_piece(&self, piece: usize, x: f64) -> f64;

    /// Polynomial degree of piece `i`.
    fn piece_degree(&self, piece: usize) -> usize;

    /// Index of the piece owning `x`.
    fn piece_at(&self, x: f64) -> usize;

    fn eval(&self, x: f64) -> f64 {
        self.eval_piece(self.piece_at(x), x)
    }
}

/// Left-continuous step function: piece `j` covers `(b_{j-1}, b_j]` with `b_{-1} = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    isotonic: bool,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(invalid("breakpoints", "at least one piece is required"));
        }
        if values.len() != breakpoints.len() {
            return Err(invalid(
                "values",
                format!(
                    "{} values for {} breakpoints",
                    values.len(),
                    breakpoints.len()
                ),
            ));
        }
        let mut prev = 0.0;
        for &b in &breakpoints {
            if !(b > prev) {
                return Err(invalid(
                    "breakpoints",
                    "must be strictly increasing in (0, 1]",
                ));
            }
            prev = b;
        }
        if *breakpoints.last().unwrap() != 1.0 {
            return Err(invalid("breakpoints", "last breakpoint must equal 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        Ok(Self {
            breakpoints,
            values,
            isotonic: false,
        })
    }

    /// Builds a step function flagged as non-decreasing; rejects violations.
    pub fn isotonic(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::new(breakpoints, values)?;
        if f.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("values", "isotonic step function must be non-decreasing"));
        }
        f.isotonic = true;
        Ok(f)
    }

    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: vec![1.0],
            values: vec![value],
            isotonic: true,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_isotonic(&self) -> bool {
        self.isotonic
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Piecewise for StepFunction {
    fn num_pieces(&self) -> usize {
        self.values.len()
    }

    fn boundary(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.breakpoints[i - 1]
        }
    }

    fn eval_piece(&self, piece: usize, _x: f64) -> f64 {
        self.values[piece]
    }

    fn piece_degree(&self, _piece: usize) -> usize {
        0
    }

    fn piece_at(&self, x: f64) -> usize {
        self.breakpoints
            .partition_point(|&b| b < x)
            .min(self.values.len() - 1)
    }
}

/// Continuous function interpolating linearly between knots `0 = t_0 < ... < t_K = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFunction {
    knots: Vec<f64>,
    knot_values: Vec<f64>,
    convex: bool,
}

impl PiecewiseLinearFunction {
    pub fn new(knots: Vec<f64>, knot_values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(invalid("knots", "need at least the two endpoints"));
        }
        if knot_values.len() != knots.len() {
            return Err(invalid(
                "knot_values",
                format!("{} values for {} knots", knot_values.len(), knots.len()),
            ));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(invalid("knots", "must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("knots", "must be strictly increasing"));
        }
        if knot_values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("knot_values", "must be finite"));
        }
        Ok(Self {
            knots,
            knot_values,
            convex: false,
        })
    }

    /// Builds a function flagged convex; slopes must be non-decreasing up to 1e-10.
    pub fn convex(knots: Vec<f64>, knot_values: Vec<f64>) -> Result<Self> {
        let mut f = Self::new(knots, knot_values)?;
        let slopes = f.slopes();
        for w in slopes.windows(2) {
            let scale = 1.0f64.max(w[0].abs()).max(w[1].abs());
            if w[1] - w[0] < -CONVEXITY_TOL * scale {
                return Err(invalid(
                    "knot_values",
                    "convex piecewise-linear function needs non-decreasing slopes",
                ));
            }
        }
        f.convex = true;
        Ok(f)
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self {
            knots: vec![0.0, 1.0],
            knot_values: vec![intercept, intercept + slope],
            convex: true,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.knot_values
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.knot_values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.knot_values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Piecewise for PiecewiseLinearFunction {
    fn num_pieces(&self) -> usize {
        self.knots.len() - 1
    }

    fn boundary(&self, i: usize) -> f64 {
        self.knots[i]
    }

    fn eval_piece(&self, piece: usize, x: f64) -> f64 {
        let (t0, t1) = (self.knots[piece], self.knots[piece + 1]);
        let (v0, v1) = (self.knot_values[piece], self.knot_values[piece + 1]);
        v0 + (v1 - v0) * (x - t0) / (t1 - t0)
    }

    fn piece_degree(&self, _piece: usize) -> usize {
        1
    }

    fn piece_at(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&t| t <= x);
        k.saturating_sub(1).min(self.num_pieces() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_is_left_continuous() {
        let f = StepFunction::new(vec![0.5, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(0.5000001), 1.0);
        assert_eq!(f.eval(1.0), 1.0);
    }

    #[test]
    fn step_function_validation() {
        assert!(StepFunction::new(vec![0.5], vec![1.0]).is_err());
        assert!(StepFunction::new(vec![0.5, 0.5, 1.0], vec![1.0; 3]).is_err());
        assert!(StepFunction::isotonic(vec![0.5, 1.0], vec![2.0, 1.0]).is_err());
        assert!(StepFunction::isotonic(vec![0.5, 1.0], vec![1.0, 1.0]).unwrap().is_isotonic());
    }

    #[test]
    fn piecewise_linear_interpolates() {
        let f = PiecewiseLinearFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!((f.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((f.eval(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.slopes(), vec![-2.0, 2.0]);
    }

    #[test]
    fn convex_flag_checks_slopes() {
        assert!(PiecewiseLinearFunction::convex(vec![0.0, 0.5, 1.0], vec![1.0, 0.0, 1.0]).is_ok());
        assert!(PiecewiseLinearFunction::convex(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).is_err());
    }
}

//! Isotonic least squares by pool-adjacent-violators, with the min-max
//! formula as an independent O(n²) oracle.

use serde::{Deserialize, Serialize};

use crate::domain::{SortedSample, StepFunction};
use crate::error::{Error, Result};

/// A maximal run of design points sharing one fitted value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// First index (inclusive).
    pub start: usize,
    /// Last index (inclusive).
    pub end: usize,
    /// Weighted mean of the responses in the block.
    pub mean: f64,
    /// Total weight of the block.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit {
    fitted: Vec<f64>,
    blocks: Vec<Block>,
    extension: StepFunction,
}

impl IsotonicFit {
    /// Fitted values at the design points, non-decreasing.
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Left-continuous step extension to [0, 1]; constant `f(X_1)` on `(0, X_1]`
    /// and `f(X_n)` on `(X_n, 1]`.
    pub fn extension(&self) -> &StepFunction {
        &self.extension
    }

    pub fn into_extension(self) -> StepFunction {
        self.extension
    }
}

/// Pool-adjacent-violators on raw responses and weights.
///
/// Blocks are kept on a stack; each new point is pushed as its own block and
/// merged backwards while the top two blocks violate monotonicity.
pub fn pava(ys: &[f64], weights: &[f64]) -> Vec<Block> {
    let mut stack: Vec<Block> = Vec::with_capacity(ys.len());
    for (i, (&y, &w)) in ys.iter().zip(weights).enumerate() {
        let mut cur = Block {
            start: i,
            end: i,
            mean: y,
            weight: w,
        };
        while let Some(top) = stack.last() {
            if top.mean < cur.mean {
                break;
            }
            let top = stack.pop().unwrap();
            let weight = top.weight + cur.weight;
            cur = Block {
                start: top.start,
                end: cur.end,
                mean: (top.mean * top.weight + cur.mean * cur.weight) / weight,
                weight,
            };
        }
        stack.push(cur);
    }
    stack
}

/// Expands blocks into one fitted value per point.
pub fn expand_blocks(blocks: &[Block], n: usize) -> Vec<f64> {
    let mut fitted = Vec::with_capacity(n);
    for b in blocks {
        fitted.extend(std::iter::repeat_n(b.mean, b.end - b.start + 1));
    }
    fitted
}

fn step_extension(xs: &[f64], blocks: &[Block]) -> Result<StepFunction> {
    let mut breakpoints = Vec::with_capacity(blocks.len());
    let mut values = Vec::with_capacity(blocks.len());
    let last = blocks.len() - 1;
    for (k, b) in blocks.iter().enumerate() {
        let right = if k == last { 1.0 } else { xs[b.end] };
        // A block ending at x = 0 has no mass on (0, 1].
        if right <= 0.0 {
            continue;
        }
        breakpoints.push(right);
        values.push(b.mean);
    }
    StepFunction::isotonic(breakpoints, values)
}

/// Isotonic LSE using the sample's own weights (unit unless ties were pooled).
pub fn fit_isotonic(sample: &SortedSample) -> Result<IsotonicFit> {
    fit_weighted_inner(sample, sample.weights().to_vec())
}

/// Isotonic LSE minimizing `Σ w_i (y_i - f_i)^2`; `weights` multiply the
/// sample's pooling weights.
pub fn fit_isotonic_weighted(sample: &SortedSample, weights: &[f64]) -> Result<IsotonicFit> {
    if weights.len() != sample.len() {
        return Err(Error::LengthMismatch {
            what: "weights",
            got: weights.len(),
            expected: sample.len(),
        });
    }
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
    {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let combined = weights
        .iter()
        .zip(sample.weights())
        .map(|(a, b)| a * b)
        .collect();
    fit_weighted_inner(sample, combined)
}

fn fit_weighted_inner(sample: &SortedSample, weights: Vec<f64>) -> Result<IsotonicFit> {
    let blocks = pava(sample.ys(), &weights);
    let fitted = expand_blocks(&blocks, sample.len());
    let extension = step_extension(sample.xs(), &blocks)?;
    Ok(IsotonicFit {
        fitted,
        blocks,
        extension,
    })
}

/// Direct evaluation of `min_{v ≥ j} max_{u ≤ j} mean(y_u..=y_v)` at the
/// zero-based index `j`, with weighted means when the sample carries weights.
pub fn minmax_value(sample: &SortedSample, j: usize) -> Result<f64> {
    let n = sample.len();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    let mut sum = vec![0.0; n + 1];
    let mut wsum = vec![0.0; n + 1];
    for i in 0..n {
        let w = sample.weights()[i];
        sum[i + 1] = sum[i] + w * sample.ys()[i];
        wsum[i + 1] = wsum[i] + w;
    }
    let mut best = f64::INFINITY;
    for v in j..n {
        let mut inner = f64::NEG_INFINITY;
        for u in 0..=j {
            let avg = (sum[v + 1] - sum[u]) / (wsum[v + 1] - wsum[u]);
            inner = inner.max(avg);
        }
        best = best.min(inner);
    }
    Ok(best)
}

/// Largest absolute gap between a fit and the min-max formula over all indices.
pub fn minmax_gap(sample: &SortedSample, fitted: &[f64]) -> Result<f64> {
    if fitted.len() != sample.len() {
        return Err(Error::LengthMismatch {
            what: "fitted",
            got: fitted.len(),
            expected: sample.len(),
        });
    }
    let mut gap: f64 = 0.0;
    for (j, f) in fitted.iter().enumerate() {
        gap = gap.max((f - minmax_value(sample, j)?).abs());
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Piecewise;

    fn sample(ys: &[f64]) -> SortedSample {
        let n = ys.len();
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        SortedSample::from_sorted(xs, ys.to_vec()).unwrap()
    }

    #[test]
    fn already_monotone_is_unchanged() {
        let fit = fit_isotonic(&sample(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(fit.fitted(), &[1.0, 2.0, 3.0]);
        assert_eq!(fit.blocks().len(), 3);
    }

    #[test]
    fn violating_pair_is_pooled() {
        let fit = fit_isotonic(&sample(&[2.0, 1.0])).unwrap();
        assert_eq!(fit.fitted(), &[1.5, 1.5]);
    }

    #[test]
    fn interior_violation() {
        let s = sample(&[1.0, 3.0, 2.0, 4.0]);
        let fit = fit_isotonic(&s).unwrap();
        assert_eq!(fit.fitted(), &[1.0, 2.5, 2.5, 4.0]);
        assert!(minmax_gap(&s, fit.fitted()).unwrap() < 1e-12);
    }

    #[test]
    fn minmax_examples() {
        let s = sample(&[3.0, 1.0, 2.0]);
        assert_eq!(minmax_value(&s, 1).unwrap(), 2.0);
        assert_eq!(minmax_value(&s, 0).unwrap(), 2.0);
        assert_eq!(minmax_value(&sample(&[5.0]), 0).unwrap(), 5.0);
        assert!(matches!(minmax_value(&s, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn weights_shift_the_pooled_mean() {
        let s = sample(&[2.0, 1.0]);
        let fit = fit_isotonic_weighted(&s, &[3.0, 1.0]).unwrap();
        assert_eq!(fit.fitted(), &[1.75, 1.75]);
        assert!(matches!(
            fit_isotonic_weighted(&s, &[1.0, 0.0]),
            Err(Error::NonPositiveWeight { index: 1, .. })
        ));
    }

    #[test]
    fn extension_matches_fit_at_design_points() {
        let s = SortedSample::from_sorted(vec![0.1, 0.4, 0.7], vec![0.0, 2.0, 1.0]).unwrap();
        let fit = fit_isotonic(&s).unwrap();
        let ext = fit.extension();
        assert!(ext.is_isotonic());
        for (x, f) in s.xs().iter().zip(fit.fitted()) {
            assert_eq!(ext.eval(*x), *f);
        }
        assert_eq!(ext.eval(0.0), 0.0);
        assert_eq!(ext.eval(1.0), 1.5);
    }

    #[test]
    fn design_point_at_zero() {
        let s = SortedSample::from_sorted(vec![0.0, 0.5], vec![-1.0, 1.0]).unwrap();
        let fit = fit_isotonic(&s).unwrap();
        assert_eq!(fit.extension().values(), &[1.0]);
    }
}

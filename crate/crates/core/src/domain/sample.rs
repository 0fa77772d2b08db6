use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Design points sorted ascending with their paired responses.
///
/// Exact duplicate design points are pooled into a single point carrying
/// the (weighted) mean response and the summed weight, so `xs` is strictly
/// increasing and every solver sees a well-posed weighted problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortedSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
}

impl SortedSample {
    /// Sorts raw `(x, y)` pairs by `x` and pools exact ties with unit weights.
    pub fn new(xs_raw: &[f64], ys_raw: &[f64]) -> Result<Self> {
        let ones = vec![1.0; xs_raw.len()];
        Self::with_weights(xs_raw, ys_raw, &ones)
    }

    /// Like [`SortedSample::new`] but with explicit positive observation weights.
    pub fn with_weights(xs_raw: &[f64], ys_raw: &[f64], weights_raw: &[f64]) -> Result<Self> {
        if xs_raw.is_empty() {
            return Err(Error::Empty);
        }
        if ys_raw.len() != xs_raw.len() {
            return Err(Error::LengthMismatch {
                what: "ys",
                got: ys_raw.len(),
                expected: xs_raw.len(),
            });
        }
        if weights_raw.len() != xs_raw.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                got: weights_raw.len(),
                expected: xs_raw.len(),
            });
        }
        for (index, &x) in xs_raw.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::OutOfUnitInterval { index, value: x });
            }
        }
        for (index, &y) in ys_raw.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        for (index, &w) in weights_raw.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { index, value: w });
            }
        }

        let mut order: Vec<usize> = (0..xs_raw.len()).collect();
        order.sort_by(|&a, &b| xs_raw[a].total_cmp(&xs_raw[b]));

        let mut xs = Vec::with_capacity(order.len());
        let mut ys = Vec::with_capacity(order.len());
        let mut weights: Vec<f64> = Vec::with_capacity(order.len());
        for i in order {
            let (x, y, w) = (xs_raw[i], ys_raw[i], weights_raw[i]);
            match xs.last() {
                Some(&last) if last == x => {
                    let k = ys.len() - 1;
                    let total = weights[k] + w;
                    ys[k] = (ys[k] * weights[k] + y * w) / total;
                    weights[k] = total;
                }
                _ => {
                    xs.push(x);
                    ys.push(y);
                    weights.push(w);
                }
            }
        }
        Ok(Self { xs, ys, weights })
    }

    /// Builds a sample from data already sorted strictly ascending, with unit weights.
    pub fn from_sorted(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        let sample = Self::with_weights(&xs, &ys, &vec![1.0; n])?;
        if sample.len() != n {
            return Err(Error::Degenerate("design points are not distinct".into()));
        }
        Ok(sample)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every point carries unit weight (no ties were pooled).
    pub fn is_unit_weighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    /// Same design and weights with new responses.
    pub fn with_responses(&self, ys: Vec<f64>) -> Result<Self> {
        if ys.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "ys",
                got: ys.len(),
                expected: self.len(),
            });
        }
        if let Some(index) = ys.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            xs: self.xs.clone(),
            ys,
            weights: self.weights.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_pairs() {
        let s = SortedSample::new(&[0.9, 0.1], &[2.0, 1.0]).unwrap();
        assert_eq!(s.xs(), &[0.1, 0.9]);
        assert_eq!(s.ys(), &[1.0, 2.0]);
        assert!(s.is_unit_weighted());
    }

    #[test]
    fn pools_duplicates_into_mean() {
        let s = SortedSample::new(&[0.5, 0.5], &[1.0, 3.0]).unwrap();
        assert_eq!(s.xs(), &[0.5]);
        assert_eq!(s.ys(), &[2.0]);
        assert_eq!(s.weights(), &[2.0]);
    }

    #[test]
    fn single_point() {
        let s = SortedSample::new(&[0.2], &[7.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.ys(), &[7.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(SortedSample::new(&[], &[]), Err(Error::Empty));
        assert!(matches!(
            SortedSample::new(&[0.1, 0.2], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            SortedSample::new(&[1.5], &[1.0]),
            Err(Error::OutOfUnitInterval { index: 0, .. })
        ));
        assert!(matches!(
            SortedSample::with_weights(&[0.1], &[1.0], &[0.0]),
            Err(Error::NonPositiveWeight { .. })
        ));
        assert!(SortedSample::from_sorted(vec![0.1, 0.1], vec![1.0, 2.0]).is_err());
    }
}

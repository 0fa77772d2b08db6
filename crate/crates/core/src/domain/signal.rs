use serde::{Deserialize, Serialize};

use super::function::Piecewise;
use crate::error::{invalid, Result};

/// A regression signal `f0` on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Constant {
        value: f64,
    },
    /// `intercept + slope * x`.
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// Left-continuous steps: `values[j]` on `(breaks[j-1], breaks[j]]`.
    StepTrain {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
    /// `sum_k coeffs[k] * x^k`.
    #[serde(alias = "convex_poly")]
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// Linear interpolation through `(knots[i], values[i])`, knots spanning [0, 1].
    CustomGrid {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

impl SignalSpec {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        Self::Linear { intercept, slope }
    }

    /// The identity signal `f0(x) = x`.
    pub fn identity() -> Self {
        Self::linear(0.0, 1.0)
    }

    pub fn step_train(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = Self::StepTrain { breaks, values };
        s.validate()?;
        Ok(s)
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let s = Self::Polynomial { coeffs };
        s.validate()?;
        Ok(s)
    }

    pub fn custom_grid(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let s = Self::CustomGrid { knots, values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(invalid(name, "must be finite"))
            }
        };
        match self {
            Self::Constant { value } => finite("value", std::slice::from_ref(value)),
            Self::Linear { intercept, slope } => finite("linear", &[*intercept, *slope]),
            Self::StepTrain { breaks, values } => {
                finite("breaks", breaks)?;
                finite("values", values)?;
                if values.len() != breaks.len() + 1 {
                    return Err(invalid(
                        "values",
                        "step train needs one more value than interior breaks",
                    ));
                }
                let mut prev = 0.0;
                for &b in breaks {
                    if !(b > prev && b < 1.0) {
                        return Err(invalid(
                            "breaks",
                            "must be strictly increasing inside (0, 1)",
                        ));
                    }
                    prev = b;
                }
                Ok(())
            }
            Self::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(invalid("coeffs", "at least one coefficient is required"));
                }
                finite("coeffs", coeffs)
            }
            Self::CustomGrid { knots, values } => {
                finite("knots", knots)?;
                finite("values", values)?;
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(invalid("knots", "need >= 2 knots, one value per knot"));
                }
                if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
                    return Err(invalid("knots", "must start at 0 and end at 1"));
                }
                if knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("knots", "must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    /// Sup-norm over [0, 1]; exact for all kinds except high-degree
    /// polynomials, where it is taken over a fine grid.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Constant { value } => value.abs(),
            Self::Linear { intercept, slope } => intercept.abs().max((intercept + slope).abs()),
            Self::StepTrain { values, .. } | Self::CustomGrid { values, .. } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            Self::Polynomial { .. } => (0..=4096)
                .map(|k| self.eval(k as f64 / 4096.0).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl Piecewise for SignalSpec {
    fn num_pieces(&self) -> usize {
        match self {
            Self::StepTrain { values, .. } => values.len(),
            Self::CustomGrid { knots, .. } => knots.len() - 1,
            _ => 1,
        }
    }

    fn boundary(&self, i: usize) -> f64 {
        match self {
            Self::StepTrain { breaks, .. } => {
                if i == 0 {
                    0.0
                } else if i > breaks.len() {
                    1.0
                } else {
                    breaks[i - 1]
                }
            }
            Self::CustomGrid { knots, .. } => knots[i],
            _ => {
                if i == 0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    fn eval_piece(&self, piece: usize, x: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Linear { intercept, slope } => intercept + slope * x,
            Self::StepTrain { values, .. } => values[piece],
            Self::Polynomial { coeffs } => horner(coeffs, x),
            Self::CustomGrid { knots, values } => {
                let (t0, t1) = (knots[piece], knots[piece + 1]);
                values[piece] + (values[piece + 1] - values[piece]) * (x - t0) / (t1 - t0)
            }
        }
    }

    fn piece_degree(&self, _piece: usize) -> usize {
        match self {
            Self::Constant { .. } | Self::StepTrain { .. } => 0,
            Self::Linear { .. } | Self::CustomGrid { .. } => 1,
            Self::Polynomial { coeffs } => coeffs.len() - 1,
        }
    }

    fn piece_at(&self, x: f64) -> usize {
        match self {
            Self::StepTrain { breaks, .. } => breaks.partition_point(|&b| b < x),
            Self::CustomGrid { knots, .. } => knots
                .partition_point(|&t| t <= x)
                .saturating_sub(1)
                .min(knots.len() - 2),
            _ => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_each_kind() {
        assert_eq!(SignalSpec::constant(2.0).eval(0.3), 2.0);
        assert_eq!(SignalSpec::linear(1.0, 2.0).eval(0.25), 1.5);
        let s = SignalSpec::step_train(vec![0.5], vec![0.0, 1.0]).unwrap();
        assert_eq!(s.eval(0.5), 0.0);
        assert_eq!(s.eval(0.6), 1.0);
        let p = SignalSpec::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
        assert!((p.eval(0.5) - 0.25).abs() < 1e-15);
        let g = SignalSpec::custom_grid(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((g.eval(0.75) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_malformed_signals() {
        assert!(SignalSpec::step_train(vec![0.5], vec![1.0]).is_err());
        assert!(SignalSpec::step_train(vec![1.0], vec![0.0, 1.0]).is_err());
        assert!(SignalSpec::custom_grid(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
        assert!(SignalSpec::polynomial(vec![]).is_err());
    }

    #[test]
    fn serde_uses_kind_tag() {
        let s: SignalSpec = serde_json::from_str(r#"{"kind":"linear","intercept":0,"slope":1}"#).unwrap();
        assert_eq!(s, SignalSpec::identity());
        let p: SignalSpec = serde_json::from_str(r#"{"kind":"convex_poly","coeffs":[0,0,1]}"#).unwrap();
        assert!(matches!(p, SignalSpec::Polynomial { .. }));
        assert!(serde_json::from_str::<SignalSpec>(r#"{"kind":"constant","value":1,"x":2}"#).is_err());
    }
}

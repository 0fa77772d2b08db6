use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{replication_rng, Estimator, ExperimentPlan, LossSummary};
use super::target::{loss_target, MarginalSignal, Target};
use crate::additive::{fit_additive, BivariateSample};
use crate::convex::fit_convex;
use crate::domain::{l2_loss, Piecewise, SortedSample};
use crate::error::{Error, Result};
use crate::isotonic::fit_isotonic;
use crate::numeric::{quantile, simple_ols};

/// Per-replication measurements of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// `‖f̂_n − f0*‖²_{L2}`.
    pub loss: f64,
    /// `sup |f̂_n|` over `[0, 1]`.
    pub sup_norm: f64,
    /// `f̂_n(0)`.
    pub at_zero: f64,
}

/// A plan bound to its loss target.
pub(crate) struct Scenario<'a> {
    pub plan: &'a ExperimentPlan,
    pub target: Target,
    pub in_class: bool,
}

impl<'a> Scenario<'a> {
    pub fn new(plan: &'a ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let f0 = if plan.estimator.is_additive() {
            MarginalSignal::of(&plan.bivariate_signal())
        } else {
            MarginalSignal::plain(plan.signal.clone())
        };
        let (target, in_class) = loss_target(f0, plan.estimator.shape(), plan.projection_grid)?;
        Ok(Self {
            plan,
            target,
            in_class,
        })
    }

    pub fn replicate(&self, n_index: usize, rep: usize) -> Result<Outcome> {
        let n = self.plan.n_grid[n_index];
        self.run_one(n, n_index, rep).map_err(|e| Error::Replication {
            n,
            replication: rep,
            source: Box::new(e),
        })
    }

    fn run_one(&self, n: usize, n_index: usize, rep: usize) -> Result<Outcome> {
        let plan = self.plan;
        let mut rng = replication_rng(plan.base_seed, rep, n_index);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        match plan.estimator {
            Estimator::Isotonic | Estimator::Convex => {
                let ys: Vec<f64> = xs
                    .iter()
                    .map(|&x| plan.signal.eval(x) + plan.law.draw(&mut rng))
                    .collect();
                let sample = SortedSample::new(&xs, &ys)?;
                if plan.estimator == Estimator::Isotonic {
                    let fit = fit_isotonic(&sample)?;
                    let f = fit.extension();
                    Ok(self.outcome(f, f.sup_norm()))
                } else {
                    let fit = fit_convex(&sample)?;
                    let f = fit.extension();
                    Ok(self.outcome(f, f.sup_norm()))
                }
            }
            Estimator::Additive {
                shape,
                hclass,
                mut options,
            } => {
                let phi = plan.bivariate_signal();
                let zs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let ys: Vec<f64> = xs
                    .iter()
                    .zip(&zs)
                    .map(|(&x, &z)| phi.eval(x, z) + plan.law.draw(&mut rng))
                    .collect();
                options.seed = rng.random();
                let sample = BivariateSample::new(xs, zs, ys)?;
                let fit = fit_additive(&sample, shape, hclass, options)?;
                let f = fit.f_hat.as_piecewise();
                let sup = match &fit.f_hat {
                    crate::additive::ShapeFit::Isotonic(g) => g.extension().sup_norm(),
                    crate::additive::ShapeFit::Convex(g) => g.extension().sup_norm(),
                };
                Ok(self.outcome(f, sup))
            }
        }
    }

    fn outcome(&self, f: &dyn Piecewise, sup_norm: f64) -> Outcome {
        Outcome {
            loss: l2_loss(f, self.target.as_piecewise()),
            sup_norm,
            at_zero: f.eval(0.0),
        }
    }

    /// All outcomes, indexed `[n_index][rep]`. Replications run in parallel and
    /// are collected in index order.
    pub fn run_all(&self) -> Result<Vec<Vec<Outcome>>> {
        (0..self.plan.n_grid.len())
            .map(|k| {
                (0..self.plan.replications)
                    .into_par_iter()
                    .map(|rep| self.replicate(k, rep))
                    .collect()
            })
            .collect()
    }
}

/// Loss summaries across sample sizes with a log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub n_grid: Vec<usize>,
    pub summary: LossSummary,
    pub summaries: Vec<f64>,
    pub iqr_lo: Vec<f64>,
    pub iqr_hi: Vec<f64>,
    /// Raw losses, `[n_index][rep]`.
    pub losses: Vec<Vec<f64>>,
    /// Slope of `log summary` on `log n`, when at least four sizes were run
    /// and every summary is positive.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Set when the summary is the mean, which may not exist.
    pub flagged: bool,
    /// Whether `f0` lies in the model; if not, losses are against `f0*`.
    pub target_in_class: bool,
}

impl RiskCurve {
    pub fn from_losses(
        n_grid: Vec<usize>,
        losses: Vec<Vec<f64>>,
        summary: LossSummary,
        target_in_class: bool,
    ) -> Self {
        let summaries: Vec<f64> = losses.iter().map(|l| summary.apply(l)).collect();
        let iqr_lo = losses.iter().map(|l| quantile(l, 0.25)).collect();
        let iqr_hi = losses.iter().map(|l| quantile(l, 0.75)).collect();
        let points: Vec<(f64, f64)> = n_grid
            .iter()
            .zip(&summaries)
            .map(|(&n, &s)| (n as f64, s))
            .collect();
        let (slope, slope_stderr) = match fit_loglog_slope(&points) {
            Ok((s, e)) => (Some(s), Some(e)),
            Err(_) => (None, None),
        };
        Self {
            n_grid,
            summary,
            summaries,
            iqr_lo,
            iqr_hi,
            losses,
            slope,
            slope_stderr,
            flagged: summary.is_flagged(),
            target_in_class,
        }
    }
}

/// Runs every replication of `plan` and summarizes the squared losses.
pub fn run_risk_curve(plan: &ExperimentPlan) -> Result<RiskCurve> {
    let scenario = Scenario::new(plan)?;
    let outcomes = scenario.run_all()?;
    let losses = outcomes
        .iter()
        .map(|row| row.iter().map(|o| o.loss).collect())
        .collect();
    Ok(RiskCurve::from_losses(
        plan.n_grid.clone(),
        losses,
        plan.loss_summary,
        scenario.in_class,
    ))
}

/// Least squares of `log summary` on `log n`; returns `(slope, stderr)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 4 {
        return Err(Error::TooSmall {
            min: 4,
            got: points.len(),
        });
    }
    for &(n, s) in points {
        if !(n > 0.0) {
            return Err(crate::error::invalid("n", format!("must be positive, got {n}")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(crate::error::invalid(
                "summary",
                format!("must be positive and finite, got {s}"),
            ));
        }
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (_, slope, stderr) = simple_ols(&x, &y);
    Ok((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_examples() {
        let grid: Vec<f64> = (7..=13).map(|k| 2f64.powi(k)).collect();
        let exact: Vec<(f64, f64)> = grid.iter().map(|&n| (n, 3.0 * n.powf(-2.0 / 3.0))).collect();
        let (s, e) = fit_loglog_slope(&exact).unwrap();
        assert!((s + 2.0 / 3.0).abs() < 1e-12 && e < 1e-12);
        let logs: Vec<(f64, f64)> = grid.iter().map(|&n| (n, n.ln().powi(2) / n)).collect();
        let (s, _) = fit_loglog_slope(&logs).unwrap();
        // Exact OLS value on this grid: -1 + 2/log n averaged, about -0.704.
        assert!(s > -0.71 && s < -0.70, "{s}");
        assert!(fit_loglog_slope(&exact[..3]).is_err());
        let mut bad = exact.clone();
        bad[2].1 = 0.0;
        assert!(fit_loglog_slope(&bad).is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::risk::Scenario;
use super::stats::{bootstrap_trend, BootstrapConfig, TrendTest};
use crate::error::Result;
use crate::numeric::median;

/// Growth of `sup |f̂_n|` and `|f̂_n(0)|` across sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub n_grid: Vec<usize>,
    pub median_sup_norm: Vec<f64>,
    pub median_abs_at_zero: Vec<f64>,
    pub sup_trend: TrendTest,
    pub zero_trend: TrendTest,
}

impl BoundednessReport {
    /// Neither median grows faster than `n^{max_slope}` at 95% confidence.
    pub fn bounded(&self, max_slope: f64) -> bool {
        self.sup_trend.not_above(max_slope) && self.zero_trend.not_above(max_slope)
    }
}

pub fn run_boundedness_probe(plan: &ExperimentPlan, bootstrap: BootstrapConfig) -> Result<BoundednessReport> {
    let scenario = Scenario::new(plan)?;
    let outcomes = scenario.run_all()?;
    let sup: Vec<Vec<f64>> = outcomes
        .iter()
        .map(|row| row.iter().map(|o| o.sup_norm).collect())
        .collect();
    let zero: Vec<Vec<f64>> = outcomes
        .iter()
        .map(|row| row.iter().map(|o| o.at_zero.abs()).collect())
        .collect();
    Ok(BoundednessReport {
        n_grid: plan.n_grid.clone(),
        median_sup_norm: sup.iter().map(|v| median(v)).collect(),
        median_abs_at_zero: zero.iter().map(|v| median(v)).collect(),
        sup_trend: bootstrap_trend(&plan.n_grid, &sup, median, bootstrap)?,
        zero_trend: bootstrap_trend(&plan.n_grid, &zero, median, bootstrap)?,
    })
}

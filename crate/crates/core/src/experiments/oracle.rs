use serde::{Deserialize, Serialize};

use super::plan::ExperimentPlan;
use super::risk::Scenario;
use super::stats::{bootstrap_trend, BootstrapConfig, TrendTest};
use crate::domain::{m_piece_approximations, ApproxFamily};
use crate::error::{invalid, Result};
use crate::numeric::{median, quantile};

/// Left- and right-hand sides of the oracle inequality at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub n: usize,
    /// `‖f̂_n − f0*‖²` per replication.
    pub lhs: Vec<f64>,
    /// `approx²(m) + m log²n / n` for `m = 1..=m_max`.
    pub rhs: Vec<f64>,
    pub rhs_min: f64,
    pub argmin_m: usize,
    /// The minimum sits at `m_max`, so a larger `m_max` could lower it.
    pub at_boundary: bool,
    pub ratios: Vec<f64>,
    pub lhs_median: f64,
    pub ratio_q25: f64,
    pub ratio_median: f64,
    pub ratio_q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAudit {
    pub family: ApproxFamily,
    pub m_max: usize,
    /// Squared error of the best m-piece approximation of `f0*`, `m = 1..=m_max`.
    pub approx_error_sq: Vec<f64>,
    /// The convex-family oracle term is an upper bound (grid DP plus repair).
    pub approx_is_upper_bound: bool,
    pub rows: Vec<OracleRow>,
    /// Bootstrap trend of the median ratio across `n`.
    pub ratio_trend: TrendTest,
    pub target_in_class: bool,
}

impl OracleAudit {
    /// No upward trend of the median ratio at 95% confidence.
    pub fn ratio_bounded(&self) -> bool {
        self.ratio_trend.not_above(0.0)
    }
}

/// Runs `plan` and compares each loss with `min_m approx²(m) + m log²n / n`.
pub fn run_oracle_audit(
    plan: &ExperimentPlan,
    m_max: usize,
    bootstrap: BootstrapConfig,
) -> Result<OracleAudit> {
    plan.validate()?;
    if m_max == 0 {
        return Err(invalid("m_max", "must be at least 1"));
    }
    let l21 = plan.law.lp1_norm(2.0)?;
    if !l21.is_finite() {
        return Err(invalid(
            "law",
            "the oracle inequality requires errors with a finite L_{2,1} norm; this law's is infinite",
        ));
    }
    let scenario = Scenario::new(plan)?;
    let family = plan.estimator.family();
    let approx = m_piece_approximations(scenario.target.as_piecewise(), m_max, family, plan.oracle_grid)?;
    let approx_error_sq: Vec<f64> = approx.iter().map(|a| a.error_sq).collect();
    let outcomes = scenario.run_all()?;
    let mut rows = Vec::with_capacity(plan.n_grid.len());
    for (k, &n) in plan.n_grid.iter().enumerate() {
        let nf = n as f64;
        let penalty = nf.ln().powi(2) / nf;
        let rhs: Vec<f64> = approx_error_sq
            .iter()
            .enumerate()
            .map(|(i, e)| e + (i + 1) as f64 * penalty)
            .collect();
        let (argmin, rhs_min) = rhs
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
        let lhs: Vec<f64> = outcomes[k].iter().map(|o| o.loss).collect();
        let ratios: Vec<f64> = lhs.iter().map(|l| l / rhs_min).collect();
        rows.push(OracleRow {
            n,
            lhs_median: median(&lhs),
            ratio_q25: quantile(&ratios, 0.25),
            ratio_median: median(&ratios),
            ratio_q75: quantile(&ratios, 0.75),
            lhs,
            rhs,
            rhs_min,
            argmin_m: argmin + 1,
            at_boundary: argmin + 1 == m_max && m_max > 1,
            ratios,
        });
    }
    let groups: Vec<Vec<f64>> = rows.iter().map(|r| r.ratios.clone()).collect();
    let ratio_trend = bootstrap_trend(&plan.n_grid, &groups, median, bootstrap)?;
    Ok(OracleAudit {
        family,
        m_max,
        approx_error_sq,
        approx_is_upper_bound: family == ApproxFamily::LinearConvex,
        rows,
        ratio_trend,
        target_in_class: scenario.in_class,
    })
}

/// `argmin_m (1 / (12 m²) + m log²n / n)`: the oracle choice for `f0(x) = x`
/// with equispaced constant pieces.
pub fn optimal_m_for_identity(n: usize, m_max: usize) -> usize {
    let nf = n as f64;
    let penalty = nf.ln().powi(2) / nf;
    (1..=m_max.max(1))
        .min_by(|&a, &b| {
            let f = |m: usize| 1.0 / (12.0 * (m * m) as f64) + m as f64 * penalty;
            f(a).total_cmp(&f(b))
        })
        .unwrap_or(1)
}

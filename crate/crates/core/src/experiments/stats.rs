use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::replication_rng;
use crate::error::{invalid, Result};
use crate::numeric::{quantile, simple_ols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0x5eed,
        }
    }
}

/// Bootstrap distribution of a log-log slope statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    /// Statistic on the original data.
    pub estimate: f64,
    /// 5% and 95% bootstrap quantiles.
    pub lower: f64,
    pub upper: f64,
    pub resamples: usize,
    /// Resamples dropped because a summary was not positive.
    pub dropped: usize,
}

impl TrendTest {
    /// One-sided test that the statistic exceeds `threshold` at 95%.
    pub fn exceeds(&self, threshold: f64) -> bool {
        self.lower >= threshold
    }

    /// One-sided test that the statistic is not significantly above `threshold`.
    pub fn not_above(&self, threshold: f64) -> bool {
        self.lower <= threshold
    }
}

fn loglog_slope(n_grid: &[usize], values: &[f64]) -> Option<f64> {
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let x: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Some(simple_ols(&x, &y).1)
}

/// Slope of `log stat(arm[k])` on `log n`, combined across arms by
/// `combine`. Each resample draws one set of replication indices per sample
/// size and applies it to every arm, so paired arms stay paired.
pub fn bootstrap_slopes<S, C>(
    n_grid: &[usize],
    arms: &[&[Vec<f64>]],
    stat: S,
    combine: C,
    config: BootstrapConfig,
) -> Result<TrendTest>
where
    S: Fn(&[f64]) -> f64 + Sync,
    C: Fn(&[f64]) -> f64 + Sync,
{
    if arms.is_empty() || n_grid.len() < 2 {
        return Err(invalid("n_grid", "need at least two sample sizes and one arm"));
    }
    for arm in arms {
        if arm.len() != n_grid.len() || arm.iter().any(|g| g.is_empty()) {
            return Err(invalid("groups", "one non-empty group per sample size is required"));
        }
        if arm.iter().zip(arms[0]).any(|(g, h)| g.len() != h.len()) {
            return Err(invalid("groups", "paired arms need equal replication counts"));
        }
    }
    if config.resamples < 10 {
        return Err(invalid("resamples", "must be at least 10"));
    }
    let evaluate = |pick: &dyn Fn(usize, &[f64]) -> Vec<f64>| -> Option<f64> {
        let mut slopes = Vec::with_capacity(arms.len());
        for arm in arms {
            let stats: Vec<f64> = arm.iter().enumerate().map(|(k, g)| stat(&pick(k, g))).collect();
            slopes.push(loglog_slope(n_grid, &stats)?);
        }
        Some(combine(&slopes))
    };
    let estimate = evaluate(&|_, g| g.to_vec()).unwrap_or(f64::NAN);
    let draws: Vec<Option<f64>> = (0..config.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(config.seed, b, 0);
            let picks: Vec<Vec<usize>> = arms[0]
                .iter()
                .map(|g| (0..g.len()).map(|_| rng.random_range(0..g.len())).collect())
                .collect();
            evaluate(&|k, g| picks[k].iter().map(|&i| g[i]).collect())
        })
        .collect();
    let kept: Vec<f64> = draws.iter().flatten().copied().collect();
    let dropped = draws.len() - kept.len();
    let (lower, upper) = if kept.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile(&kept, 0.05), quantile(&kept, 0.95))
    };
    Ok(TrendTest {
        estimate,
        lower,
        upper,
        resamples: config.resamples,
        dropped,
    })
}

/// Single-arm slope of `log stat` on `log n`.
pub fn bootstrap_trend<S>(
    n_grid: &[usize],
    groups: &[Vec<f64>],
    stat: S,
    config: BootstrapConfig,
) -> Result<TrendTest>
where
    S: Fn(&[f64]) -> f64 + Sync,
{
    bootstrap_slopes(n_grid, &[groups], stat, |s| s[0], config)
}

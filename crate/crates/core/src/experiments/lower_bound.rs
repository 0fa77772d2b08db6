use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{replication_rng, LossSummary, MIN_REPLICATIONS};
use super::risk::RiskCurve;
use super::stats::{bootstrap_slopes, BootstrapConfig, TrendTest};
use crate::envelopes::{build_tree_class, predicted_rate_exponent, ChildSelector, TreeClass};
use crate::error::{invalid, Error, Result};
use crate::noise::ErrorLaw;

/// `ϑ` in the error scale `50 ϑ² η` used at `γ = 1`.
pub const GAMMA_ONE_THETA: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundPlan {
    pub gamma: f64,
    pub eps: f64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Deepest tree level; by default the first level whose intervals are no
    /// longer than `1 / max(n_grid)`.
    #[serde(default)]
    pub max_level: Option<usize>,
    #[serde(default)]
    pub selector: ChildSelector,
    /// Light-tailed comparison arm; defaults to the Gaussian with
    /// characteristic function `exp(-t²)`.
    #[serde(default)]
    pub light_law: Option<ErrorLaw>,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    /// Losses are interval lengths, so quantiles sit on a few discrete
    /// values; the mean exists because every loss lies in `[0, 1]`.
    #[serde(default = "default_probe_summary")]
    pub loss_summary: LossSummary,
}

fn default_probe_summary() -> LossSummary {
    LossSummary::Mean
}

impl LowerBoundPlan {
    pub fn new(gamma: f64, eps: f64, n_grid: Vec<usize>, replications: usize, base_seed: u64) -> Self {
        Self {
            gamma,
            eps,
            n_grid,
            replications,
            base_seed,
            max_level: None,
            selector: ChildSelector::Leftmost,
            light_law: None,
            bootstrap: BootstrapConfig::default(),
            loss_summary: default_probe_summary(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", format!("must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(invalid("eps", format!("must lie in (0, 1/2), got {}", self.eps)));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_grid", "must be non-empty, positive and strictly increasing"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(invalid(
                "replications",
                format!("must be at least {MIN_REPLICATIONS}, got {}", self.replications),
            ));
        }
        if let Some(law) = &self.light_law {
            law.validate()?;
        }
        self.loss_summary.validate()
    }

    /// `sym_stable(2 - ε)` for `γ < 1`; `50 ϑ² η` with `ϑ = 4` for `γ = 1`.
    pub fn heavy_law(&self) -> ErrorLaw {
        if self.gamma < 1.0 {
            ErrorLaw::sym_stable(2.0 - self.eps, 1.0)
        } else {
            ErrorLaw::pareto_eta(50.0 * GAMMA_ONE_THETA * GAMMA_ONE_THETA)
        }
    }

    pub fn light_law(&self) -> ErrorLaw {
        self.light_law
            .unwrap_or(ErrorLaw::gaussian(std::f64::consts::SQRT_2))
    }
}

/// The finite class the least squares estimator ranges over.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeClass {
    Tree(TreeClass),
    /// `{1_[0,t] : t ∈ [0, 1]}`.
    LeftIntervals,
}

impl ProbeClass {
    pub fn for_plan(plan: &LowerBoundPlan) -> Result<(Self, bool)> {
        let n_max = *plan.n_grid.last().expect("validated") as f64;
        if plan.gamma >= 1.0 {
            return Ok((Self::LeftIntervals, true));
        }
        let ratio = 2f64.powf(1.0 / (1.0 - plan.gamma));
        let needed = (n_max.ln() / ratio.ln()).ceil().max(1.0) as usize;
        let level = plan.max_level.unwrap_or(needed);
        let tree = build_tree_class(plan.gamma, level, plan.selector)?;
        Ok((Self::Tree(tree), level >= needed))
    }
}

/// Least squares member for `f0 = 0`: among interval indicators `1_I` and the
/// zero function, minimize `Σ (Y_i - f(X_i))²`. Relative to zero, `1_I`
/// changes the criterion by `N_I - 2 S_I`. Returns the loss `|I|` (or 0).
///
/// Ties keep the first member in the order: zero, then shallow levels first,
/// left to right.
pub fn finite_class_lse(class: &ProbeClass, xs_sorted: &[f64], ys: &[f64]) -> f64 {
    let mut prefix = Vec::with_capacity(ys.len() + 1);
    prefix.push(0.0);
    for y in ys {
        prefix.push(prefix.last().unwrap() + y);
    }
    match class {
        ProbeClass::Tree(tree) => {
            let mut best = (0.0, 0.0);
            for (_, iv) in tree.members() {
                let lo = xs_sorted.partition_point(|&x| x < iv.start);
                let hi = xs_sorted.partition_point(|&x| x <= iv.end());
                let change = (hi - lo) as f64 - 2.0 * (prefix[hi] - prefix[lo]);
                if change < best.0 {
                    best = (change, iv.length);
                }
            }
            best.1
        }
        ProbeClass::LeftIntervals => {
            // t between consecutive design points is equivalent; take t = X_(k).
            let mut best = (0.0, 0.0);
            for k in 1..=xs_sorted.len() {
                let change = k as f64 - 2.0 * prefix[k];
                if change < best.0 {
                    best = (change, xs_sorted[k - 1]);
                }
            }
            best.1
        }
    }
}

/// Same argmin, enumerating deepest level first and right to left, with the
/// tie-break applied explicitly; used to cross-check [`finite_class_lse`].
pub fn finite_class_lse_reversed(class: &ProbeClass, xs_sorted: &[f64], ys: &[f64]) -> f64 {
    let criterion = |lo: usize, hi: usize| {
        let s: f64 = ys[lo..hi].iter().sum();
        (hi - lo) as f64 - 2.0 * s
    };
    match class {
        ProbeClass::Tree(tree) => {
            // Key: (criterion, level, position); zero has level 0.
            let mut best: (f64, usize, usize, f64) = (0.0, 0, 0, 0.0);
            for l in (1..=tree.max_level()).rev() {
                for (pos, iv) in tree.level(l).iter().enumerate().rev() {
                    let lo = xs_sorted.partition_point(|&x| x < iv.start);
                    let hi = xs_sorted.partition_point(|&x| x <= iv.end());
                    let c = criterion(lo, hi);
                    let better = c < best.0
                        || (c == best.0 && (l, pos) < (best.1, best.2));
                    if better {
                        best = (c, l, pos, iv.length);
                    }
                }
            }
            best.3
        }
        ProbeClass::LeftIntervals => {
            let mut best = (0.0, usize::MAX, 0.0);
            for k in (1..=xs_sorted.len()).rev() {
                let c = criterion(0, k);
                if c < best.0 || (c == best.0 && best.1 != usize::MAX && k < best.1) {
                    best = (c, k, xs_sorted[k - 1]);
                }
            }
            best.2
        }
    }
}

/// Loss curve of the finite-class least squares estimator under `law`.
pub fn run_lower_bound_probe(plan: &LowerBoundPlan, law: ErrorLaw) -> Result<RiskCurve> {
    plan.validate()?;
    law.validate()?;
    let (class, _) = ProbeClass::for_plan(plan)?;
    probe_curve(plan, &class, law)
}

fn probe_curve(plan: &LowerBoundPlan, class: &ProbeClass, law: ErrorLaw) -> Result<RiskCurve> {
    let losses: Vec<Vec<f64>> = plan
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            (0..plan.replications)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = replication_rng(plan.base_seed, rep, k);
                    let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                    xs.sort_by(f64::total_cmp);
                    let ys: Vec<f64> = (0..n).map(|_| law.draw_coupled(&mut rng)).collect();
                    let loss = finite_class_lse(class, &xs, &ys);
                    if loss.is_finite() {
                        Ok(loss)
                    } else {
                        Err(Error::Replication {
                            n,
                            replication: rep,
                            source: Box::new(Error::Numerical("non-finite loss".into())),
                        })
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut curve = RiskCurve::from_losses(plan.n_grid.clone(), losses, plan.loss_summary, true);
    curve.flagged = false;
    Ok(curve)
}

/// Heavy- and light-tailed arms on shared seeds, with a paired bootstrap of
/// the slope difference `heavy - light`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedProbe {
    pub gamma: f64,
    pub eps: f64,
    pub heavy_law: ErrorLaw,
    pub light_law: ErrorLaw,
    pub max_level: Option<usize>,
    /// Deepest intervals are no longer than `1 / max(n_grid)`.
    pub depth_sufficient: bool,
    pub heavy: RiskCurve,
    pub light: RiskCurve,
    /// Squared-loss slope implied by the envelope upper bound, `-1 / (2 - γ)`.
    pub predicted_upper_slope: f64,
    pub slope_gap: TrendTest,
}

impl PairedProbe {
    /// Heavy arm shallower than the light arm by at least `margin`, one-sided 95%.
    pub fn heavy_is_slower(&self, margin: f64) -> bool {
        self.slope_gap.exceeds(margin)
    }
}

pub fn run_paired_lower_bound(plan: &LowerBoundPlan) -> Result<PairedProbe> {
    plan.validate()?;
    let (class, depth_sufficient) = ProbeClass::for_plan(plan)?;
    let heavy_law = plan.heavy_law();
    let light_law = plan.light_law();
    let heavy = probe_curve(plan, &class, heavy_law)?;
    let light = probe_curve(plan, &class, light_law)?;
    let slope_gap = bootstrap_slopes(
        &plan.n_grid,
        &[&heavy.losses, &light.losses],
        |l| plan.loss_summary.apply(l),
        |s| s[0] - s[1],
        plan.bootstrap,
    )?;
    Ok(PairedProbe {
        gamma: plan.gamma,
        eps: plan.eps,
        heavy_law,
        light_law,
        max_level: match &class {
            ProbeClass::Tree(t) => Some(t.max_level()),
            ProbeClass::LeftIntervals => None,
        },
        depth_sufficient,
        heavy,
        light,
        predicted_upper_slope: -2.0 * predicted_rate_exponent(plan.gamma)?,
        slope_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumeration_orders_agree() {
        let plan = LowerBoundPlan::new(0.5, 0.25, vec![64, 256], 30, 0);
        let (tree, deep) = ProbeClass::for_plan(&plan).unwrap();
        assert!(deep);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..200 {
            let n = 20 + trial % 200;
            let mut xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            xs.sort_by(f64::total_cmp);
            let ys: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 0.6).collect();
            for class in [&tree, &ProbeClass::LeftIntervals] {
                let a = finite_class_lse(class, &xs, &ys);
                let b = finite_class_lse_reversed(class, &xs, &ys);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn zero_wins_when_responses_are_negative() {
        let xs: Vec<f64> = (1..=20).map(|i| i as f64 / 21.0).collect();
        let ys = vec![-1.0; 20];
        let tree = build_tree_class(0.5, 3, ChildSelector::Leftmost).unwrap();
        assert_eq!(finite_class_lse(&ProbeClass::Tree(tree), &xs, &ys), 0.0);
        let ys = vec![5.0; 20];
        assert_eq!(finite_class_lse(&ProbeClass::LeftIntervals, &xs, &ys), xs[19]);
    }

    #[test]
    fn plan_checks() {
        assert!(LowerBoundPlan::new(0.0, 0.25, vec![64], 30, 0).validate().is_err());
        assert!(LowerBoundPlan::new(0.5, 0.6, vec![64], 30, 0).validate().is_err());
        assert!(LowerBoundPlan::new(0.5, 0.25, vec![64], 10, 0).validate().is_err());
        let mut p = LowerBoundPlan::new(0.5, 0.25, vec![64, 4096], 30, 0);
        p.max_level = Some(2);
        assert!(!ProbeClass::for_plan(&p).unwrap().1);
        assert_eq!(p.heavy_law(), ErrorLaw::sym_stable(1.75, 1.0));
        let p1 = LowerBoundPlan::new(1.0, 0.25, vec![64], 30, 0);
        assert_eq!(p1.heavy_law(), ErrorLaw::pareto_eta(800.0));
    }
}

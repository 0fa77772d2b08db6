//! Monte Carlo layer: risk curves, log-log slopes, oracle audits, the
//! paired lower-bound probe and stochastic-boundedness checks.
//!
//! Replication `r` at the `k`-th sample size draws from a ChaCha8 generator
//! seeded with `base_seed ^ r` on stream `k`, so results do not depend on
//! thread count or scheduling.

mod boundedness;
mod lower_bound;
mod oracle;
mod plan;
mod risk;
mod stats;
mod target;

pub use boundedness::{run_boundedness_probe, BoundednessReport};
pub use lower_bound::{
    finite_class_lse, finite_class_lse_reversed, run_lower_bound_probe, run_paired_lower_bound,
    LowerBoundPlan, PairedProbe, ProbeClass, GAMMA_ONE_THETA,
};
pub use oracle::{optimal_m_for_identity, run_oracle_audit, OracleAudit, OracleRow};
pub use plan::{replication_rng, Estimator, ExperimentPlan, LossSummary, MIN_REPLICATIONS};
pub use risk::{fit_loglog_slope, run_risk_curve, Outcome, RiskCurve};
pub use stats::{bootstrap_slopes, bootstrap_trend, BootstrapConfig, TrendTest};
pub use target::{compute_f0_star, discrete_projection, loss_target, F0Star, MarginalSignal, Target};

//! Shape-restricted least squares on [0, 1] and a Monte Carlo laboratory
//! for their convergence rates under heavy-tailed errors.
//!
//! * [`isotonic`]: pool-adjacent-violators with a min-max oracle.
//! * [`convex`]: active-set convex regression with a cumulative-sum audit.
//! * [`additive`]: backfitting for `Y = f(X) + h(Z) + noise` with shape-constrained `f`.
//! * [`envelopes`]: localized envelope profiles, growth exponents and the
//!   tree-structured lower-bound class.
//! * [`noise`]: Gaussian, Student-t, symmetric stable and Pareto-tail error laws.
//! * [`experiments`]: risk curves, oracle-inequality audits and the lower-bound probe.
//! * [`cli`]: JSON-config batch runner behind the `shaperate` binary.

pub mod additive;
pub mod cli;
pub mod convex;
pub mod domain;
pub mod envelopes;
pub mod error;
pub mod experiments;
pub mod isotonic;
pub mod noise;
pub mod numeric;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::additive::{AdditiveOptions, BivariateSignal, HClass, Shape};
use crate::domain::{ApproxFamily, SignalSpec};
use crate::error::{invalid, Result};
use crate::noise::ErrorLaw;
use crate::numeric::{median, quantile, trimmed_mean};

/// Minimum Monte Carlo replications per sample size.
pub const MIN_REPLICATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    Isotonic,
    Convex,
    Additive {
        shape: Shape,
        hclass: HClass,
        #[serde(default)]
        options: AdditiveOptions,
    },
}

impl Estimator {
    pub fn shape(&self) -> Shape {
        match *self {
            Self::Isotonic => Shape::Isotonic,
            Self::Convex => Shape::Convex,
            Self::Additive { shape, .. } => shape,
        }
    }

    pub fn family(&self) -> ApproxFamily {
        match self.shape() {
            Shape::Isotonic => ApproxFamily::Constant,
            Shape::Convex => ApproxFamily::LinearConvex,
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Self::Additive { .. })
    }
}

/// How losses are summarized across replications. `Mean` is available but
/// flagged: the expectation may not exist.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSummary {
    #[default]
    Median,
    TrimmedMean {
        fraction: f64,
    },
    Quantile {
        q: f64,
    },
    Mean,
}

impl LossSummary {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::TrimmedMean { fraction } if !(0.0..0.5).contains(&fraction) => Err(invalid(
                "fraction",
                format!("must lie in [0, 0.5), got {fraction}"),
            )),
            Self::Quantile { q } if !(0.0..=1.0).contains(&q) => {
                Err(invalid("q", format!("must lie in [0, 1], got {q}")))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        match *self {
            Self::Median => median(values),
            Self::TrimmedMean { fraction } => trimmed_mean(values, fraction),
            Self::Quantile { q } => quantile(values, q),
            Self::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn is_flagged(&self) -> bool {
        matches!(self, Self::Mean)
    }
}

fn default_projection_grid() -> usize {
    4096
}

fn default_oracle_grid() -> usize {
    512
}

/// Monte Carlo protocol: design uniform on `[0, 1]` (or `[0, 1]²`), errors
/// from `law`, one fit per replication and sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub estimator: Estimator,
    /// `f0`; for additive plans the `x` part when `bivariate` is absent.
    pub signal: SignalSpec,
    #[serde(default)]
    pub bivariate: Option<BivariateSignal>,
    pub law: ErrorLaw,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub loss_summary: LossSummary,
    /// Grid for the discrete projection onto the shape class.
    #[serde(default = "default_projection_grid")]
    pub projection_grid: usize,
    /// Breakpoint grid for the m-piece oracle approximations.
    #[serde(default = "default_oracle_grid")]
    pub oracle_grid: usize,
}

impl ExperimentPlan {
    pub fn new(
        estimator: Estimator,
        signal: SignalSpec,
        law: ErrorLaw,
        n_grid: Vec<usize>,
        replications: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            estimator,
            signal,
            bivariate: None,
            law,
            n_grid,
            replications,
            base_seed,
            loss_summary: LossSummary::Median,
            projection_grid: default_projection_grid(),
            oracle_grid: default_oracle_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.law.validate()?;
        self.loss_summary.validate()?;
        if let Some(b) = &self.bivariate {
            if !self.estimator.is_additive() {
                return Err(invalid("bivariate", "only allowed with an additive estimator"));
            }
            b.validate()?;
        }
        if let Estimator::Additive { hclass, options, .. } = &self.estimator {
            hclass.validate()?;
            if !(options.tol > 0.0) || options.max_iters == 0 {
                return Err(invalid("options", "tol must be positive and max_iters at least 1"));
            }
        }
        if self.n_grid.is_empty() {
            return Err(invalid("n_grid", "must not be empty"));
        }
        let min_n = match self.estimator.shape() {
            Shape::Isotonic => 1,
            Shape::Convex => 2,
        };
        if self.n_grid[0] < min_n {
            return Err(invalid("n_grid", format!("sample sizes must be at least {min_n}")));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_grid", "must be strictly increasing"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(invalid(
                "replications",
                format!("must be at least {MIN_REPLICATIONS}, got {}", self.replications),
            ));
        }
        if self.projection_grid < 256 {
            return Err(invalid("projection_grid", "must be at least 256"));
        }
        if self.oracle_grid < crate::domain::MIN_GRID_SIZE {
            return Err(invalid(
                "oracle_grid",
                format!("must be at least {}", crate::domain::MIN_GRID_SIZE),
            ));
        }
        Ok(())
    }

    /// `φ0`, with the plain signal lifted to `(x, z) ↦ f0(x)` when needed.
    pub fn bivariate_signal(&self) -> BivariateSignal {
        self.bivariate
            .clone()
            .unwrap_or_else(|| BivariateSignal::additive(self.signal.clone(), SignalSpec::constant(0.0)))
    }
}

/// Generator for replication `rep` at the `n_index`-th sample size:
/// seeded with `base_seed ^ rep`, stream `n_index`.
pub fn replication_rng(base_seed: u64, rep: usize, n_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ rep as u64);
    rng.set_stream(n_index as u64);
    rng
}

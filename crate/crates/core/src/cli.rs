//! Batch runner: one JSON config in, `results.json` plus flat CSV tables out.
//!
//! ```json
//! { "command": "simulate",
//!   "plan": { "estimator": {"kind": "isotonic"},
//!             "signal": {"kind": "linear", "intercept": 0, "slope": 1},
//!             "law": {"kind": "gaussian", "sigma": 1},
//!             "n_grid": [128, 256, 512, 1024], "replications": 50,
//!             "base_seed": 7 } }
//! ```
//!
//! CSV schemas:
//!
//! | command       | file                                     | columns                                  |
//! |---------------|------------------------------------------|------------------------------------------|
//! | `fit`         | `fit.csv`                                | `x, y, fitted`                           |
//! | `simulate`    | `simulate.csv`                           | `n, summary, iqr_lo, iqr_hi`             |
//! | `oracle`      | `oracle.csv`                             | `n, lhs_median, rhs_min, ratio_median`   |
//! | `envelope`    | `envelope.csv`                           | `delta, norm`                            |
//! | `lower-bound` | `lower_bound_heavy.csv`, `lower_bound_light.csv` | same as `simulate`               |
//!
//! Exit status: 0 on success, 2 when the config is unreadable or invalid,
//! 3 when a computation or a write fails.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::additive::Shape;
use crate::convex::{characterization_audit, fit_convex};
use crate::domain::SortedSample;
use crate::envelopes::{envelope_norm, fit_gamma, EnvelopeModel};
use crate::error::Error;
use crate::experiments::{
    run_oracle_audit, run_paired_lower_bound, run_risk_curve, BootstrapConfig, ExperimentPlan,
    LowerBoundPlan, RiskCurve,
};
use crate::isotonic::{fit_isotonic, minmax_gap};

#[derive(Debug, Clone, Parser)]
#[command(name = "shaperate", version, about = "Run a shaperate experiment from a JSON config")]
pub struct Args {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "SHAPERATE_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Overrides the config's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Simulate,
    Oracle,
    Envelope,
    LowerBound,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Fit => "fit",
            Self::Simulate => "simulate",
            Self::Oracle => "oracle",
            Self::Envelope => "envelope",
            Self::LowerBound => "lower-bound",
        }
    }
}

/// Inline sample for `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRequest {
    pub shape: Shape,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    #[serde(alias = "isotonic")]
    IsotonicBounded,
    #[serde(alias = "convex")]
    ConvexBounded,
    #[serde(rename = "linear_1d")]
    Linear1d,
    SingleChangepoint,
    MultiChangepoint,
}

/// Either an explicit list or `"a..b"`, log-spaced with `per_decade` points
/// per decade and both endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    List(Vec<f64>),
    Range(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeRequest {
    pub model: ModelName,
    /// Sup-norm bound of the isotonic and convex models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub deltas: DeltaSpec,
    #[serde(default = "one")]
    pub per_decade: usize,
}

fn one() -> usize {
    1
}

impl EnvelopeRequest {
    pub fn envelope_model(&self) -> Result<EnvelopeModel, CliError> {
        let b = self.b.unwrap_or(1.0);
        if self.b.is_some() && !matches!(self.model, ModelName::IsotonicBounded | ModelName::ConvexBounded) {
            return Err(CliError::validation("envelope.b", "only the bounded models take a bound"));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::validation("envelope.b", format!("must be positive, got {b}")));
        }
        Ok(match self.model {
            ModelName::IsotonicBounded => EnvelopeModel::isotonic(b),
            ModelName::ConvexBounded => EnvelopeModel::convex(b),
            ModelName::Linear1d => EnvelopeModel::Linear1d,
            ModelName::SingleChangepoint => EnvelopeModel::SingleChangepoint,
            ModelName::MultiChangepoint => EnvelopeModel::MultiChangepoint,
        })
    }

    pub fn delta_grid(&self) -> Result<Vec<f64>, CliError> {
        let deltas = match &self.deltas {
            DeltaSpec::List(v) => v.clone(),
            DeltaSpec::Range(s) => {
                let bad = || CliError::validation("envelope.deltas", format!("expected \"a..b\", got {s:?}"));
                let (a, b) = s.split_once("..").ok_or_else(bad)?;
                let a: f64 = a.trim().parse().map_err(|_| bad())?;
                let b: f64 = b.trim().parse().map_err(|_| bad())?;
                if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(bad());
                }
                if self.per_decade == 0 {
                    return Err(CliError::validation("envelope.per_decade", "must be at least 1"));
                }
                let decades = (b / a).log10();
                let steps = (decades.abs() * self.per_decade as f64).round().max(1.0) as usize;
                (0..=steps)
                    .map(|k| a * 10f64.powf(decades * k as f64 / steps as f64))
                    .collect()
            }
        };
        if deltas.is_empty() {
            return Err(CliError::validation("envelope.deltas", "must not be empty"));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(CliError::validation("envelope.deltas", format!("must be positive, got {d}")));
        }
        Ok(deltas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitRequest>,
    /// `simulate` and `oracle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<ExperimentPlan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<LowerBoundPlan>,
    /// Largest number of pieces in the oracle bound (default 8).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    /// Bootstrap settings for the oracle ratio trend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "config".to_string() } else { path };
            CliError::validation(key, e.inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::validation("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The seed that drives the run, if the command is random.
    pub fn seed(&self) -> Option<u64> {
        match self.command {
            Command::Simulate | Command::Oracle => self.plan.as_ref().map(|p| p.base_seed),
            Command::LowerBound => self.lower_bound.as_ref().map(|p| p.base_seed),
            Command::Fit | Command::Envelope => None,
        }
    }

    pub fn override_seed(&mut self, seed: u64) {
        if let Some(p) = &mut self.plan {
            p.base_seed = seed;
        }
        if let Some(p) = &mut self.lower_bound {
            p.base_seed = seed;
        }
    }

    /// Checks that the sections match the command and that each is valid,
    /// before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let present = [
            ("fit", self.fit.is_some()),
            ("plan", self.plan.is_some()),
            ("envelope", self.envelope.is_some()),
            ("lower_bound", self.lower_bound.is_some()),
            ("m_max", self.m_max.is_some()),
            ("bootstrap", self.bootstrap.is_some()),
        ];
        let (required, allowed): (&str, &[&str]) = match self.command {
            Command::Fit => ("fit", &["fit"]),
            Command::Simulate => ("plan", &["plan"]),
            Command::Oracle => ("plan", &["plan", "m_max", "bootstrap"]),
            Command::Envelope => ("envelope", &["envelope"]),
            Command::LowerBound => ("lower_bound", &["lower_bound"]),
        };
        for (key, is_set) in present {
            if key == required && !is_set {
                return Err(CliError::validation(
                    key,
                    format!("required by command `{}`", self.command.name()),
                ));
            }
            if is_set && !allowed.contains(&key) {
                return Err(CliError::validation(
                    key,
                    format!("not used by command `{}`", self.command.name()),
                ));
            }
        }
        match self.command {
            Command::Fit => {
                self.fit_sample()?;
            }
            Command::Simulate | Command::Oracle => {
                let plan = self.plan.as_ref().unwrap();
                plan.validate().map_err(|e| keyed("plan", e))?;
                if self.command == Command::Oracle {
                    if self.m_max == Some(0) {
                        return Err(CliError::validation("m_max", "must be at least 1"));
                    }
                    let l21 = plan.law.lp1_norm(2.0).map_err(|e| keyed("plan.law", e))?;
                    if !l21.is_finite() {
                        return Err(CliError::validation(
                            "plan.law",
                            "the oracle inequality requires errors with a finite L_{2,1} norm; this law's is infinite",
                        ));
                    }
                    if let Some(b) = self.bootstrap {
                        if b.resamples < 10 {
                            return Err(CliError::validation("bootstrap.resamples", "must be at least 10"));
                        }
                    }
                }
            }
            Command::Envelope => {
                let req = self.envelope.as_ref().unwrap();
                req.envelope_model()?;
                req.delta_grid()?;
            }
            Command::LowerBound => {
                let plan = self.lower_bound.as_ref().unwrap();
                plan.validate().map_err(|e| keyed("lower_bound", e))?;
            }
        }
        Ok(())
    }

    fn fit_sample(&self) -> Result<SortedSample, CliError> {
        let req = self.fit.as_ref().ok_or_else(|| CliError::validation("fit", "missing"))?;
        let sample = match &req.weights {
            Some(w) => SortedSample::with_weights(&req.xs, &req.ys, w),
            None => SortedSample::new(&req.xs, &req.ys),
        };
        let sample = sample.map_err(|e| keyed("fit", e))?;
        if req.shape == Shape::Convex && sample.len() < 2 {
            return Err(CliError::validation("fit.xs", "convex fits need at least two points"));
        }
        Ok(sample)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Runtime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    /// Offending config key, or `--flag`.
    pub key: String,
    pub message: String,
}

impl CliError {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn runtime(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for CliError {}

fn keyed(section: &str, e: Error) -> CliError {
    let key = match &e {
        Error::InvalidParameter { name, .. } => format!("{section}.{name}"),
        Error::LengthMismatch { what, .. } => format!("{section}.{what}"),
        Error::OutOfUnitInterval { .. } | Error::NonFinite { .. } if section == "fit" => "fit.xs/ys".into(),
        Error::NonPositiveWeight { .. } => format!("{section}.weights"),
        _ => section.to_string(),
    };
    let message = match e {
        Error::InvalidParameter { reason, .. } => reason,
        other => other.to_string(),
    };
    CliError::validation(key, message)
}

fn failed(section: &str, e: Error) -> CliError {
    CliError::runtime(section, e.to_string())
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub results: Value,
    pub files: Vec<PathBuf>,
    /// Human-readable digest for stdout.
    pub summary: String,
}

#[derive(Serialize)]
struct CurveRow {
    n: usize,
    summary: f64,
    iqr_lo: f64,
    iqr_hi: f64,
}

#[derive(Serialize)]
struct OracleCsvRow {
    n: usize,
    lhs_median: f64,
    rhs_min: f64,
    ratio_median: f64,
}

#[derive(Serialize)]
struct EnvelopeRow {
    delta: f64,
    norm: f64,
}

#[derive(Serialize)]
struct FitRow {
    x: f64,
    y: f64,
    fitted: f64,
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::runtime("out", format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::runtime("out", format!("writing {}: {e}", path.display())))
}

fn curve_rows(c: &RiskCurve) -> Vec<CurveRow> {
    (0..c.n_grid.len())
        .map(|k| CurveRow {
            n: c.n_grid[k],
            summary: c.summaries[k],
            iqr_lo: c.iqr_lo[k],
            iqr_hi: c.iqr_hi[k],
        })
        .collect()
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map_or("n/a".into(), |s| format!("{s:.4}"))
}

/// Validates `config`, runs it and writes artifacts under `out`.
pub fn execute(config: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    config.validate()?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::runtime("out", format!("cannot create {}: {e}", out.display())))?;
    let mut files = Vec::new();
    let (result, summary) = match config.command {
        Command::Fit => {
            let sample = config.fit_sample()?;
            let req = config.fit.as_ref().unwrap();
            let (fitted, audit, text) = match req.shape {
                Shape::Isotonic => {
                    let fit = fit_isotonic(&sample).map_err(|e| failed("fit", e))?;
                    let gap = minmax_gap(&sample, fit.fitted()).map_err(|e| failed("fit", e))?;
                    (fit.fitted().to_vec(), json!({ "minmax_gap": gap }), format!("minmax_gap = {gap:.3e}"))
                }
                Shape::Convex => {
                    let fit = fit_convex(&sample).map_err(|e| failed("fit", e))?;
                    let a = characterization_audit(&sample, &fit).map_err(|e| failed("fit", e))?;
                    let text = format!(
                        "max_violation = {:.3e}, max_kink_gap = {:.3e}, endpoint_gap = {:.3e}",
                        a.max_violation, a.max_kink_gap, a.endpoint_gap
                    );
                    (fit.fitted().to_vec(), serde_json::to_value(&a).unwrap(), text)
                }
            };
            let rows: Vec<FitRow> = (0..sample.len())
                .map(|i| FitRow {
                    x: sample.xs()[i],
                    y: sample.ys()[i],
                    fitted: fitted[i],
                })
                .collect();
            let mut lines = String::from("x\ty\tfitted\n");
            for r in &rows {
                lines.push_str(&format!("{}\t{}\t{}\n", r.x, r.y, r.fitted));
            }
            lines.push_str(&text);
            let path = out.join("fit.csv");
            write_csv(&path, rows)?;
            files.push(path);
            let result = json!({ "xs": sample.xs(), "ys": sample.ys(), "fitted": fitted, "audit": audit });
            (result, lines)
        }
        Command::Simulate => {
            let curve = run_risk_curve(config.plan.as_ref().unwrap()).map_err(|e| failed("plan", e))?;
            let path = out.join("simulate.csv");
            write_csv(&path, curve_rows(&curve))?;
            files.push(path);
            let text = format!("slope = {}", fmt_slope(curve.slope));
            (serde_json::to_value(&curve).unwrap(), text)
        }
        Command::Oracle => {
            let audit = run_oracle_audit(
                config.plan.as_ref().unwrap(),
                config.m_max.unwrap_or(8),
                config.bootstrap.unwrap_or_default(),
            )
            .map_err(|e| failed("plan", e))?;
            let path = out.join("oracle.csv");
            write_csv(
                &path,
                audit.rows.iter().map(|r| OracleCsvRow {
                    n: r.n,
                    lhs_median: r.lhs_median,
                    rhs_min: r.rhs_min,
                    ratio_median: r.ratio_median,
                }),
            )?;
            files.push(path);
            let text = format!(
                "median-ratio slope = {:.4} (90% interval {:.4}..{:.4}); bounded = {}",
                audit.ratio_trend.estimate,
                audit.ratio_trend.lower,
                audit.ratio_trend.upper,
                audit.ratio_bounded()
            );
            (serde_json::to_value(&audit).unwrap(), text)
        }
        Command::Envelope => {
            let req = config.envelope.as_ref().unwrap();
            let model = req.envelope_model()?;
            let deltas = req.delta_grid()?;
            let norms = deltas
                .iter()
                .map(|&d| envelope_norm(model, d))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| failed("envelope", e))?;
            let points: Vec<(f64, f64)> = deltas.iter().copied().zip(norms.iter().copied()).collect();
            let fitted = fit_gamma(&points).ok();
            let path = out.join("envelope.csv");
            write_csv(&path, points.iter().map(|&(delta, norm)| EnvelopeRow { delta, norm }))?;
            files.push(path);
            let text = match fitted {
                Some((g, t)) => format!("gamma_hat = {g:.4}, tau_hat = {t:.4}"),
                None => "too few deltas to fit gamma".into(),
            };
            let result = json!({
                "model": model,
                "deltas": deltas,
                "norms": norms,
                "gamma_hat": fitted.map(|f| f.0),
                "log_correction": fitted.map(|f| f.1),
            });
            (result, text)
        }
        Command::LowerBound => {
            let probe =
                run_paired_lower_bound(config.lower_bound.as_ref().unwrap()).map_err(|e| failed("lower_bound", e))?;
            for (name, curve) in [("heavy", &probe.heavy), ("light", &probe.light)] {
                let path = out.join(format!("lower_bound_{name}.csv"));
                write_csv(&path, curve_rows(curve))?;
                files.push(path);
            }
            let text = format!(
                "heavy slope = {}, light slope = {}, gap = {:.4} (5% quantile {:.4})",
                fmt_slope(probe.heavy.slope),
                fmt_slope(probe.light.slope),
                probe.slope_gap.estimate,
                probe.slope_gap.lower
            );
            (serde_json::to_value(&probe).unwrap(), text)
        }
    };
    let results = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command,
        "seed": config.seed(),
        "config": config,
        "result": result,
    });
    let path = out.join("results.json");
    let text = serde_json::to_string_pretty(&results)
        .map_err(|e| CliError::runtime("out", format!("serializing results: {e}")))?;
    fs::write(&path, text).map_err(|e| CliError::runtime("out", format!("writing {}: {e}", path.display())))?;
    files.insert(0, path);
    Ok(RunReport {
        results,
        files,
        summary,
    })
}

/// Entry point behind the binary.
pub fn run(args: &Args) -> Result<RunReport, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.override_seed(seed);
    }
    config.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("shaperate-out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::validation("--threads", e.to_string()))?;
    pool.install(|| execute(&config, &out))
}

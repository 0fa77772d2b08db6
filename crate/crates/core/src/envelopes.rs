//! Localized envelopes: closed-form profiles, growth-exponent fits, predicted
//! rate exponents and the nested interval tree used for lower bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::gl16;

/// Envelope constant for convex functions with unit `L2` norm.
pub const CONVEX_ENVELOPE_CONSTANT: f64 = 3.464_101_615_137_754_6; // 2 * sqrt(3)

/// Built-in models with known localized envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeModel {
    /// Non-decreasing functions bounded by `b`.
    #[serde(alias = "isotonic")]
    IsotonicBounded {
        #[serde(default = "unit")]
        b: f64,
    },
    /// Convex functions bounded by `b`.
    #[serde(alias = "convex")]
    ConvexBounded {
        #[serde(default = "unit")]
        b: f64,
    },
    /// `{β x : |β| <= 1}`.
    Linear1d,
    /// `{1_[a,1]}`.
    SingleChangepoint,
    /// Step functions with free change points and unit amplitude.
    MultiChangepoint,
}

fn unit() -> f64 {
    1.0
}

impl EnvelopeModel {
    pub fn isotonic(b: f64) -> Self {
        Self::IsotonicBounded { b }
    }

    pub fn convex(b: f64) -> Self {
        Self::ConvexBounded { b }
    }

    /// The five models at `B = 1`.
    pub fn builtin() -> [Self; 5] {
        [
            Self::IsotonicBounded { b: 1.0 },
            Self::ConvexBounded { b: 1.0 },
            Self::Linear1d,
            Self::SingleChangepoint,
            Self::MultiChangepoint,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::IsotonicBounded { .. } => "isotonic_bounded",
            Self::ConvexBounded { .. } => "convex_bounded",
            Self::Linear1d => "linear_1d",
            Self::SingleChangepoint => "single_changepoint",
            Self::MultiChangepoint => "multi_changepoint",
        }
    }

    /// Asymptotic `(γ, τ)` in `‖F(δ)‖ ≍ δ^γ log^τ(1/δ)`.
    pub fn nominal_exponents(&self) -> (f64, f64) {
        match self {
            Self::IsotonicBounded { .. } | Self::ConvexBounded { .. } => (1.0, 0.5),
            Self::Linear1d | Self::SingleChangepoint => (1.0, 0.0),
            Self::MultiChangepoint => (0.0, 0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::IsotonicBounded { b } | Self::ConvexBounded { b } if !(b > 0.0 && b.is_finite()) => {
                Err(invalid("b", format!("must be positive and finite, got {b}")))
            }
            _ => Ok(()),
        }
    }

    /// Pointwise envelope `F(δ)(x)`.
    pub fn envelope_value(&self, delta: f64, x: f64) -> f64 {
        match *self {
            Self::IsotonicBounded { b } => shape_envelope(delta, b, x),
            Self::ConvexBounded { b } => shape_envelope(CONVEX_ENVELOPE_CONSTANT * delta, b, x),
            Self::Linear1d => (3f64.sqrt() * delta).min(1.0) * x.abs(),
            Self::SingleChangepoint => {
                if x >= 1.0 - (delta * delta).min(1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::MultiChangepoint => 1.0,
        }
    }

    /// Points in `(0, 1)` where the envelope is not smooth.
    fn kinks(&self, delta: f64) -> Vec<f64> {
        let cut = |d: f64, b: f64| {
            let x = (d / b).powi(2);
            if x < 0.5 {
                vec![x, 0.5, 1.0 - x]
            } else {
                vec![0.5]
            }
        };
        match *self {
            Self::IsotonicBounded { b } => cut(delta, b),
            Self::ConvexBounded { b } => cut(CONVEX_ENVELOPE_CONSTANT * delta, b),
            Self::SingleChangepoint if delta < 1.0 => vec![1.0 - delta * delta],
            _ => Vec::new(),
        }
    }
}

fn shape_envelope(scaled_delta: f64, b: f64, x: f64) -> f64 {
    let t = x.min(1.0 - x);
    if t <= 0.0 {
        return b;
    }
    (scaled_delta / t.sqrt()).min(b)
}

/// `sqrt(∫ min(d² / min(x, 1-x), B²) dx)`.
fn shape_norm(d: f64, b: f64) -> f64 {
    let d2 = d * d;
    let b2 = b * b;
    if d2 <= 0.5 * b2 {
        (2.0 * d2 * (1.0 + (b2 / (2.0 * d2)).ln())).sqrt()
    } else {
        b
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(invalid("delta", format!("must be positive and finite, got {delta}")))
    }
}

/// Closed-form `‖F(δ)‖_{L2}` on `[0, 1]`.
pub fn envelope_norm(model: EnvelopeModel, delta: f64) -> Result<f64> {
    model.validate()?;
    check_delta(delta)?;
    Ok(match model {
        EnvelopeModel::IsotonicBounded { b } => shape_norm(delta, b),
        EnvelopeModel::ConvexBounded { b } => shape_norm(CONVEX_ENVELOPE_CONSTANT * delta, b),
        EnvelopeModel::Linear1d => delta.min(1.0 / 3f64.sqrt()),
        EnvelopeModel::SingleChangepoint => delta.min(1.0),
        EnvelopeModel::MultiChangepoint => 1.0,
    })
}

/// Quadrature cross-check of [`envelope_norm`] with about `nodes` evaluations.
///
/// The unit interval is split at the envelope's kinks and each piece is cut
/// into geometrically graded panels towards its endpoints.
pub fn envelope_norm_quadrature(model: EnvelopeModel, delta: f64, nodes: usize) -> Result<f64> {
    model.validate()?;
    check_delta(delta)?;
    let rule = gl16();
    let mut cuts = vec![0.0];
    cuts.extend(model.kinks(delta));
    cuts.push(1.0);
    let pieces = cuts.len() - 1;
    let panels_per_piece = (nodes / (rule.len() * pieces)).max(2);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        for (lo, hi) in graded_panels(a, b, panels_per_piece) {
            total += rule.integrate(lo, hi, |x| model.envelope_value(delta, x).powi(2));
        }
    }
    Ok(total.sqrt())
}

/// Panels on `[a, b]` refined geometrically towards both ends.
fn graded_panels(a: f64, b: f64, count: usize) -> Vec<(f64, f64)> {
    let half = count / 2;
    let mid = 0.5 * (a + b);
    let ratio: f64 = 1.5;
    let mut left = Vec::with_capacity(half);
    // Sizes h, h r, ..., h r^{half-1} summing to mid - a.
    let h = (mid - a) * (ratio - 1.0) / (ratio.powi(half as i32) - 1.0);
    let mut x = a;
    for k in 0..half {
        let next = if k + 1 == half { mid } else { x + h * ratio.powi(k as i32) };
        left.push((x, next));
        x = next;
    }
    let mut panels = left.clone();
    for &(lo, hi) in left.iter().rev() {
        panels.push((a + b - hi, a + b - lo));
    }
    panels
}

/// `δ ↦ ‖F(δ)‖` on a grid together with the fitted growth exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeProfile {
    pub deltas: Vec<f64>,
    pub norms: Vec<f64>,
    pub gamma_hat: f64,
    pub log_correction: f64,
}

/// Evaluates `model` on `deltas` (in parallel) and fits `(γ, τ)`.
pub fn envelope_profile(model: EnvelopeModel, deltas: &[f64]) -> Result<EnvelopeProfile> {
    let mut deltas = deltas.to_vec();
    deltas.sort_by(f64::total_cmp);
    let norms = deltas
        .par_iter()
        .map(|&d| envelope_norm(model, d))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = deltas.iter().copied().zip(norms.iter().copied()).collect();
    let (gamma_hat, log_correction) = fit_gamma(&points)?;
    Ok(EnvelopeProfile {
        deltas,
        norms,
        gamma_hat,
        log_correction,
    })
}

/// Least squares of `log norm` on `(1, log δ, log log(1/δ))`; returns
/// `(γ̂ clipped to [0, 1], τ̂)`.
pub fn fit_gamma(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 4 {
        return Err(Error::TooSmall {
            min: 4,
            got: points.len(),
        });
    }
    for &(d, v) in points {
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {d}")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid("norm", format!("must be positive, got {v}")));
        }
    }
    let (lo, hi) = points.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &(d, _)| {
        (lo.min(d), hi.max(d))
    });
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Degenerate(format!(
            "delta grid spans {:.3} decades, need at least 2",
            (hi / lo).log10()
        )));
    }
    // Normal equations in centered coordinates.
    let u: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let v: Vec<f64> = points.iter().map(|p| (-p.0.ln()).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = points.len() as f64;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / n;
    let (mu, mv, my) = (mean(&u), mean(&v), mean(&y));
    let (mut suu, mut svv, mut suv, mut suy, mut svy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..points.len() {
        let (du, dv, dy) = (u[i] - mu, v[i] - mv, y[i] - my);
        suu += du * du;
        svv += dv * dv;
        suv += du * dv;
        suy += du * dy;
        svy += dv * dy;
    }
    let det = suu * svv - suv * suv;
    if det.abs() <= 1e-12 * suu * svv {
        return Err(Error::Degenerate("log delta and log log(1/delta) are collinear".into()));
    }
    let gamma = (svv * suy - suv * svy) / det;
    let tau = (suu * svy - suv * suy) / det;
    Ok((gamma.clamp(0.0, 1.0), tau))
}

/// Exponent `r` in `‖f̂_n − f_0‖ ≍ n^{−r}` for envelope growth `δ^γ`.
pub fn predicted_rate_exponent(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(invalid("gamma", format!("must lie in [0, 1], got {gamma}")));
    }
    Ok(1.0 / (2.0 * (2.0 - gamma)))
}

/// Which two of a parent's subintervals are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChildSelector {
    #[default]
    Leftmost,
    Seeded(u64),
}

/// A closed interval `[start, start + length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub length: f64,
}

impl Interval {
    pub fn end(&self) -> f64 {
        self.start + self.length
    }

    pub fn contains(&self, other: &Interval) -> bool {
        let slack = 1e-12 * self.length;
        other.start >= self.start - slack && other.end() <= self.end() + slack
    }
}

/// Nested family of interval indicators, `2^l` intervals of length `r^{-l}` at
/// level `l`, with `r = 2^{1/(1-γ)}`. Level 0 is the unit interval and is not
/// itself a member; the zero function is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeClass {
    gamma: f64,
    ratio: f64,
    levels: Vec<Vec<Interval>>,
}

impl TreeClass {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Shrink factor `r` between consecutive levels.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn max_level(&self) -> usize {
        self.levels.len()
    }

    /// Intervals at level `l` (`1..=max_level`).
    pub fn level(&self, l: usize) -> &[Interval] {
        &self.levels[l - 1]
    }

    /// `r^{-l}`, the length of each level-`l` interval.
    pub fn level_length(&self, l: usize) -> f64 {
        self.ratio.powi(-(l as i32))
    }

    /// Every member except the zero function, shallowest level first.
    pub fn members(&self) -> impl Iterator<Item = (usize, &Interval)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(l, ivs)| ivs.iter().map(move |iv| (l + 1, iv)))
    }

    pub fn num_members(&self) -> usize {
        self.levels.iter().map(Vec::len).sum::<usize>() + 1
    }

    /// Smallest level whose indicators satisfy `P f² <= δ²`, at least 1.
    /// `None` when no constructed level qualifies.
    pub fn critical_level(&self, delta: f64) -> Option<usize> {
        let d2 = delta * delta;
        (1..=self.max_level()).find(|&l| self.level_length(l) <= d2)
    }
}

/// Builds levels `1..=max_level` of the tree class for `γ ∈ (0, 1)`.
pub fn build_tree_class(gamma: f64, max_level: usize, selector: ChildSelector) -> Result<TreeClass> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    if max_level == 0 {
        return Err(Error::TooSmall { min: 1, got: 0 });
    }
    let ratio = 2f64.powf(1.0 / (1.0 - gamma));
    let children = ratio.floor() as usize;
    if children < 2 {
        return Err(invalid("gamma", "each parent must hold at least two children"));
    }
    if ratio.powi(-(max_level as i32)) < 1e-15 {
        return Err(invalid("max_level", "interval lengths below machine precision"));
    }
    let mut rng = match selector {
        ChildSelector::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        ChildSelector::Leftmost => None,
    };
    let mut levels: Vec<Vec<Interval>> = Vec::with_capacity(max_level);
    let mut parents = vec![Interval {
        start: 0.0,
        length: 1.0,
    }];
    for l in 1..=max_level {
        let length = ratio.powi(-(l as i32));
        let mut next = Vec::with_capacity(parents.len() * 2);
        for parent in &parents {
            let (i, j) = match rng.as_mut() {
                None => (0, 1),
                Some(rng) => {
                    let i = rng.random_range(0..children);
                    let mut j = rng.random_range(0..children - 1);
                    if j >= i {
                        j += 1;
                    }
                    (i.min(j), i.max(j))
                }
            };
            for k in [i, j] {
                next.push(Interval {
                    start: parent.start + k as f64 * length,
                    length,
                });
            }
        }
        levels.push(next.clone());
        parents = next;
    }
    Ok(TreeClass {
        gamma,
        ratio,
        levels,
    })
}

/// One row of [`TreeEnvelopeReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEnvelopeRow {
    pub delta: f64,
    /// `None` when δ is below the deepest constructed level.
    pub critical_level: Option<usize>,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnvelopeReport {
    pub rows: Vec<TreeEnvelopeRow>,
    pub max_ratio: f64,
    /// Number of δ values for which only the zero function qualifies.
    pub truncated: usize,
}

/// `‖F̃(δ)‖ / δ^γ` over a δ grid, where `F̃(δ)` is the pointwise supremum of
/// members with `P f² <= δ²`.
///
/// Deeper members are nested inside the critical level, so the envelope is
/// the union of the critical-level intervals; its measure is computed by
/// merging those intervals.
pub fn tree_envelope_check(tree: &TreeClass, deltas: &[f64]) -> Result<TreeEnvelopeReport> {
    let mut rows = Vec::with_capacity(deltas.len());
    let mut truncated = 0;
    for &delta in deltas {
        check_delta(delta)?;
        let level = tree.critical_level(delta);
        let norm = match level {
            Some(l) => union_measure(tree.level(l)).sqrt(),
            None => {
                truncated += 1;
                0.0
            }
        };
        rows.push(TreeEnvelopeRow {
            delta,
            critical_level: level,
            norm,
            ratio: norm / delta.powf(tree.gamma),
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(TreeEnvelopeReport {
        rows,
        max_ratio,
        truncated,
    })
}

fn union_measure(intervals: &[Interval]) -> f64 {
    let mut sorted: Vec<(f64, f64)> = intervals.iter().map(|iv| (iv.start, iv.end())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (a, b) in sorted {
        current = match current {
            Some((ca, cb)) if a <= cb => Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((ca, cb)) = current {
        total += cb - ca;
    }
    total
}

/// Checks that every level-`l+1` interval sits inside some level-`l` interval
/// and that each parent has exactly two children.
pub fn tree_is_nested(tree: &TreeClass) -> bool {
    for l in 1..tree.max_level() {
        let parents = tree.level(l);
        let children = tree.level(l + 1);
        if children.len() != 2 * parents.len() {
            return false;
        }
        for (k, parent) in parents.iter().enumerate() {
            if !(parent.contains(&children[2 * k]) && parent.contains(&children[2 * k + 1])) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_norm_examples() {
        let iso = envelope_norm(EnvelopeModel::isotonic(1.0), 0.1).unwrap();
        assert!((iso - (0.02 * (1.0 + 50f64.ln())).sqrt()).abs() < 1e-12);
        assert!((iso - 0.3134).abs() < 1e-4);
        assert_eq!(envelope_norm(EnvelopeModel::Linear1d, 0.2).unwrap(), 0.2);
        assert_eq!(envelope_norm(EnvelopeModel::MultiChangepoint, 0.37).unwrap(), 1.0);
        assert_eq!(envelope_norm(EnvelopeModel::isotonic(1.0), 0.9).unwrap(), 1.0);
        assert!(envelope_norm(EnvelopeModel::Linear1d, 0.0).is_err());
        assert!(envelope_norm(EnvelopeModel::isotonic(-1.0), 0.1).is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for model in EnvelopeModel::builtin() {
            for delta in [0.3, 0.1, 0.01, 1e-3, 1e-4] {
                let exact = envelope_norm(model, delta).unwrap();
                let quad = envelope_norm_quadrature(model, delta, 10_000).unwrap();
                assert!((exact - quad).abs() < 1e-8, "{model:?} δ={delta}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn isotonic_ratio_grows_like_sqrt_log() {
        let model = EnvelopeModel::isotonic(1.0);
        let mut last = 0.0;
        for k in 1..=8 {
            let d = 10f64.powi(-k);
            let r = envelope_norm(model, d).unwrap() / d;
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn fit_gamma_examples() {
        let grid: Vec<f64> = (0..=30).map(|k| 10f64.powf(-1.0 - k as f64 / 10.0)).collect();
        let pts = |f: &dyn Fn(f64) -> f64| grid.iter().map(|&d| (d, f(d))).collect::<Vec<_>>();
        let (g, t) = fit_gamma(&pts(&|d| d)).unwrap();
        assert!((g - 1.0).abs() < 1e-10 && t.abs() < 1e-10);
        let (g, t) = fit_gamma(&pts(&|_| 1.0)).unwrap();
        assert!(g.abs() < 1e-10 && t.abs() < 1e-10);
        let (g, t) = fit_gamma(&pts(&|d| d * (1.0 / d).ln().sqrt())).unwrap();
        assert!((g - 1.0).abs() < 0.05 && (t - 0.5).abs() < 0.05);
        assert!(fit_gamma(&pts(&|d| d)[..3]).is_err());
        let narrow: Vec<(f64, f64)> = (0..5).map(|k| (0.1 - 0.01 * k as f64, 1.0)).collect();
        assert!(fit_gamma(&narrow).is_err());
    }

    #[test]
    fn rate_exponents() {
        assert_eq!(predicted_rate_exponent(1.0).unwrap(), 0.5);
        assert_eq!(predicted_rate_exponent(0.0).unwrap(), 0.25);
        assert!((predicted_rate_exponent(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(predicted_rate_exponent(1.5).is_err());
    }

    #[test]
    fn tree_levels() {
        let tree = build_tree_class(0.5, 3, ChildSelector::Leftmost).unwrap();
        assert_eq!(tree.level(1).len(), 2);
        assert!(tree.level(1).iter().all(|iv| iv.length == 0.25));
        assert_eq!(tree.level(2).len(), 4);
        assert!(tree.level(2).iter().all(|iv| iv.length == 1.0 / 16.0));
        assert_eq!(tree.level(3).len(), 8);
        assert_eq!(tree.num_members(), 15);
        assert!(tree_is_nested(&tree));
        let seeded = build_tree_class(0.75, 3, ChildSelector::Seeded(9)).unwrap();
        assert!(tree_is_nested(&seeded));
        assert!(build_tree_class(1.0, 3, ChildSelector::Leftmost).is_err());
        assert!(build_tree_class(0.5, 200, ChildSelector::Leftmost).is_err());
    }

    #[test]
    fn tree_envelope_bounds() {
        for gamma in [0.25, 0.5, 0.75] {
            let tree = build_tree_class(gamma, 12, ChildSelector::Leftmost).unwrap();
            let deltas: Vec<f64> = (0..=30).map(|k| 10f64.powf(-(k as f64) / 10.0)).collect();
            let report = tree_envelope_check(&tree, &deltas).unwrap();
            assert!(report.max_ratio <= 2f64.sqrt());
            let r = tree.ratio();
            let first = report.rows[0];
            assert!((first.norm - (2.0 / r).sqrt()).abs() < 1e-14);
        }
        let tree = build_tree_class(0.5, 2, ChildSelector::Leftmost).unwrap();
        let report = tree_envelope_check(&tree, &[1e-3]).unwrap();
        assert_eq!(report.truncated, 1);
        assert_eq!(report.rows[0].norm, 0.0);
    }
}

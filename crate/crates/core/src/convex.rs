//! Convex least squares on [0, 1].
//!
//! The fit is the weighted projection of the responses onto sequences with
//! non-decreasing divided slopes. [`fit_convex`] runs a primal active-set
//! method over the second-divided-difference constraints: the free
//! constraints are kept as knots of a linear spline, each working set is
//! solved as an equality-constrained projection, and constraints are released
//! or re-activated according to the signs of their Lagrange multipliers.
//!
//! For a fit `f` with weighted cumulative residuals
//! `E_k = Σ_{i≤k} w_i (f_i - y_i)`, the multiplier of the constraint at
//! design index `j` is `Λ_j = Σ_{k<j} E_k (x_{k+1} - x_k)`, which is exactly
//! the slack in the cumulative-sum characterization audited by
//! [`characterization_audit`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{Piecewise, PiecewiseLinearFunction, SortedSample};
use crate::error::{invalid, Error, Result};
use crate::numeric::solve_tridiagonal;

/// Relative slope change above which a fitted point counts as a kink.
pub const KINK_REL_TOL: f64 = 1e-9;

/// Largest sample accepted by [`brute_force_convex`].
pub const BRUTE_FORCE_MAX_N: usize = 12;

const FEASIBILITY_REL_TOL: f64 = 1e-12;
const HULL_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFit {
    fitted: Vec<f64>,
    kinks: Vec<usize>,
    extension: PiecewiseLinearFunction,
    residual_norm: f64,
}

impl ConvexFit {
    /// Builds the fit record from fitted values at the design points.
    pub fn from_fitted(sample: &SortedSample, fitted: Vec<f64>) -> Result<Self> {
        if fitted.len() != sample.len() {
            return Err(Error::LengthMismatch {
                what: "fitted",
                got: fitted.len(),
                expected: sample.len(),
            });
        }
        if sample.len() < 2 {
            return Err(Error::TooSmall {
                min: 2,
                got: sample.len(),
            });
        }
        let kinks = detect_kinks(sample.xs(), &fitted);
        let (extension, kinks) = linear_extension(sample.xs(), &fitted, &kinks)?;
        let scale = fitted.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let drift = sample
            .xs()
            .iter()
            .zip(&fitted)
            .map(|(&x, f)| (extension.eval(x) - f).abs())
            .fold(0.0f64, f64::max);
        if drift > 1e-9 * scale {
            return Err(invalid("fitted", format!("values are not convex (off by {drift:.3e})")));
        }
        let residual_norm = sample
            .ys()
            .iter()
            .zip(&fitted)
            .zip(sample.weights())
            .map(|((y, f), w)| w * (y - f).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            fitted,
            kinks,
            extension,
            residual_norm,
        })
    }

    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// Interior design indices where the slope strictly increases.
    pub fn kinks(&self) -> &[usize] {
        &self.kinks
    }

    pub fn extension(&self) -> &PiecewiseLinearFunction {
        &self.extension
    }

    pub fn into_extension(self) -> PiecewiseLinearFunction {
        self.extension
    }

    /// `sqrt(Σ w_i (y_i - f_i)^2)`.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }
}

fn divided_slopes(xs: &[f64], f: &[f64]) -> Vec<f64> {
    xs.windows(2)
        .zip(f.windows(2))
        .map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0]))
        .collect()
}

fn detect_kinks(xs: &[f64], fitted: &[f64]) -> Vec<usize> {
    let slopes = divided_slopes(xs, fitted);
    slopes
        .windows(2)
        .enumerate()
        .filter(|(_, s)| {
            let scale = 1.0f64.max(s[0].abs()).max(s[1].abs());
            s[1] - s[0] > KINK_REL_TOL * scale
        })
        .map(|(i, _)| i + 1)
        .collect()
}

/// Interpolates through the kinks and continues the boundary segments
/// linearly out to 0 and 1. Kinks that rounding has left marginally concave
/// are dropped by taking the lower convex hull; the survivors are returned.
fn linear_extension(
    xs: &[f64],
    fitted: &[f64],
    kinks: &[usize],
) -> Result<(PiecewiseLinearFunction, Vec<usize>)> {
    let n = xs.len();
    let slope = |a: usize, b: usize| (fitted[b] - fitted[a]) / (xs[b] - xs[a]);
    let mut hull: Vec<usize> = Vec::with_capacity(kinks.len() + 2);
    for &i in std::iter::once(&0).chain(kinks).chain(std::iter::once(&(n - 1))) {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let (s0, s1) = (slope(a, b), slope(b, i));
            let scale = 1.0f64.max(s0.abs()).max(s1.abs());
            if s1 - s0 <= HULL_REL_TOL * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let h = hull.len();
    let first_slope = slope(hull[0], hull[1]);
    let last_slope = slope(hull[h - 2], hull[h - 1]);
    let mut knots = vec![0.0];
    let mut values = vec![fitted[0] - first_slope * xs[0]];
    for &i in &hull[1..h - 1] {
        knots.push(xs[i]);
        values.push(fitted[i]);
    }
    knots.push(1.0);
    values.push(fitted[n - 1] + last_slope * (1.0 - xs[n - 1]));
    let kept = hull[1..h - 1].to_vec();
    Ok((PiecewiseLinearFunction::convex(knots, values)?, kept))
}

/// Weighted least squares onto linear splines whose knots sit at the design
/// points `knot_idx` (sorted, interior), plus both end points. Returns the
/// spline values at the knots (end points included).
fn spline_projection(
    xs: &[f64],
    ys: &[f64],
    ws: &[f64],
    knot_idx: &[usize],
) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = xs.len();
    let mut knots = Vec::with_capacity(knot_idx.len() + 2);
    knots.push(0);
    knots.extend_from_slice(knot_idx);
    knots.push(n - 1);
    let k = knots.len();
    let mut diag = vec![0.0; k];
    let mut off = vec![0.0; k - 1];
    let mut rhs = vec![0.0; k];
    for p in 0..k - 1 {
        let (a, b) = (knots[p], knots[p + 1]);
        let (t0, t1) = (xs[a], xs[b]);
        let start = if p == 0 { a } else { a + 1 };
        for i in start..=b {
            let lam = (xs[i] - t0) / (t1 - t0);
            let w = ws[i];
            diag[p] += w * (1.0 - lam) * (1.0 - lam);
            off[p] += w * lam * (1.0 - lam);
            diag[p + 1] += w * lam * lam;
            rhs[p] += w * ys[i] * (1.0 - lam);
            rhs[p + 1] += w * ys[i] * lam;
        }
    }
    let coef = solve_tridiagonal(&diag, &off, &rhs)?;
    Ok((knots, coef))
}

fn evaluate_spline(xs: &[f64], knots: &[usize], coef: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    out.push(coef[0]);
    for p in 0..knots.len() - 1 {
        let (a, b) = (knots[p], knots[p + 1]);
        let (t0, t1) = (xs[a], xs[b]);
        for x in &xs[a + 1..=b] {
            let lam = (x - t0) / (t1 - t0);
            out.push(coef[p] * (1.0 - lam) + coef[p + 1] * lam);
        }
    }
    out
}

/// Slope change of the spline at each interior knot.
fn knot_slope_changes(xs: &[f64], knots: &[usize], coef: &[f64]) -> Vec<(f64, f64)> {
    let slopes: Vec<f64> = (0..knots.len() - 1)
        .map(|p| (coef[p + 1] - coef[p]) / (xs[knots[p + 1]] - xs[knots[p]]))
        .collect();
    slopes
        .windows(2)
        .map(|s| (s[1] - s[0], 1.0f64.max(s[0].abs()).max(s[1].abs())))
        .collect()
}

/// Multipliers `Λ_j` for every design index (`Λ_0 = 0`).
fn multipliers(xs: &[f64], ys: &[f64], ws: &[f64], fitted: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut lambda = vec![0.0; n];
    let mut cum_resid = 0.0;
    let mut acc = 0.0;
    for j in 1..n {
        cum_resid += ws[j - 1] * (fitted[j - 1] - ys[j - 1]);
        acc += cum_resid * (xs[j] - xs[j - 1]);
        lambda[j] = acc;
    }
    lambda
}

fn weighted_sse(ys: &[f64], ws: &[f64], f: &[f64]) -> f64 {
    ys.iter()
        .zip(ws)
        .zip(f)
        .map(|((y, w), v)| w * (y - v).powi(2))
        .sum()
}

/// Convex LSE by the primal active-set method.
pub fn fit_convex(sample: &SortedSample) -> Result<ConvexFit> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooSmall { min: 2, got: n });
    }
    let (xs, ys, ws) = (sample.xs(), sample.ys(), sample.weights());
    if n == 2 {
        return ConvexFit::from_fitted(sample, ys.to_vec());
    }

    let scale_y = ys
        .iter()
        .zip(ws)
        .map(|(y, w)| w * y.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mult_tol = 1e-13 * scale_y.max(1.0);

    // Free constraints (knots), kept sorted.
    let mut knots_free: Vec<usize> = Vec::new();
    let (knots, coef) = spline_projection(xs, ys, ws, &knots_free)?;
    let mut fitted = evaluate_spline(xs, &knots, &coef);
    let mut is_knot = vec![false; n];
    let max_outer = 20 * n + 100;

    for _ in 0..max_outer {
        let lambda = multipliers(xs, ys, ws, &fitted);
        let release = (1..n - 1)
            .filter(|&j| !is_knot[j])
            .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]))
            .filter(|&j| lambda[j] < -mult_tol);
        let Some(j_new) = release else {
            return ConvexFit::from_fitted(sample, fitted);
        };

        let mut trial: Vec<usize> = knots_free.clone();
        let pos = trial.partition_point(|&k| k < j_new);
        trial.insert(pos, j_new);

        // Inner loop: step toward the working-set solution until feasible.
        loop {
            let (t_knots, t_coef) = spline_projection(xs, ys, ws, &trial)?;
            let changes = knot_slope_changes(xs, &t_knots, &t_coef);
            let feasible = changes
                .iter()
                .all(|&(d, s)| d >= -FEASIBILITY_REL_TOL * s);
            let t_fitted = evaluate_spline(xs, &t_knots, &t_coef);
            if feasible {
                fitted = t_fitted;
                knots_free = trial;
                break;
            }
            // Current iterate's slope changes at the trial knots.
            let cur_changes: Vec<f64> = trial
                .iter()
                .map(|&k| {
                    let s_left = (fitted[k] - fitted[k - 1]) / (xs[k] - xs[k - 1]);
                    let s_right = (fitted[k + 1] - fitted[k]) / (xs[k + 1] - xs[k]);
                    s_right - s_left
                })
                .collect();
            let mut step = 1.0f64;
            let mut blocking = Vec::new();
            for (idx, &(d_new, s)) in changes.iter().enumerate() {
                if d_new < -FEASIBILITY_REL_TOL * s {
                    let d_cur = cur_changes[idx].max(0.0);
                    let t = d_cur / (d_cur - d_new);
                    if t < step - 1e-15 {
                        step = t;
                        blocking.clear();
                        blocking.push(idx);
                    } else if (t - step).abs() <= 1e-15 {
                        blocking.push(idx);
                    }
                }
            }
            for (f, t) in fitted.iter_mut().zip(&t_fitted) {
                *f += step * (t - *f);
            }
            for idx in blocking.iter().rev() {
                trial.remove(*idx);
            }
            if trial.is_empty() {
                let (k0, c0) = spline_projection(xs, ys, ws, &trial)?;
                fitted = evaluate_spline(xs, &k0, &c0);
                knots_free = trial;
                break;
            }
        }
        is_knot.iter_mut().for_each(|b| *b = false);
        for &k in &knots_free {
            is_knot[k] = true;
        }
    }
    Err(Error::Numerical(format!(
        "active set did not terminate within {max_outer} iterations"
    )))
}

/// Exhaustive oracle: solves the projection for every subset of the `n - 2`
/// slope constraints declared free and keeps the best convex candidate.
pub fn brute_force_convex(sample: &SortedSample) -> Result<ConvexFit> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooSmall { min: 2, got: n });
    }
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            max: BRUTE_FORCE_MAX_N,
            got: n,
        });
    }
    let (xs, ys, ws) = (sample.xs(), sample.ys(), sample.weights());
    let interior = n.saturating_sub(2);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << interior) {
        let free: Vec<usize> = (0..interior)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| b + 1)
            .collect();
        // Truncated power basis: 1, x, (x - x_k)_+ for free k.
        let p = 2 + free.len();
        let design = DMatrix::from_fn(n, p, |i, c| {
            let sw = ws[i].sqrt();
            sw * match c {
                0 => 1.0,
                1 => xs[i],
                _ => (xs[i] - xs[free[c - 2]]).max(0.0),
            }
        });
        let target = DVector::from_fn(n, |i, _| ws[i].sqrt() * ys[i]);
        let svd = design.clone().svd(true, true);
        let Ok(beta) = svd.solve(&target, 1e-13) else {
            continue;
        };
        // Hinge coefficients are the slope changes at the free knots.
        let scale = 1.0f64.max(beta[1].abs());
        if (2..p).any(|c| beta[c] < -1e-10 * scale) {
            continue;
        }
        let fitted: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = beta[0] + beta[1] * xs[i];
                for (c, &k) in free.iter().enumerate() {
                    v += beta[c + 2] * (xs[i] - xs[k]).max(0.0);
                }
                v
            })
            .collect();
        let sse = weighted_sse(ys, ws, &fitted);
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, fitted));
        }
    }
    let (_, fitted) = best.ok_or_else(|| Error::Numerical("no feasible active set".into()))?;
    ConvexFit::from_fitted(sample, fitted)
}

/// Result of checking the cumulative-sum characterization of the convex LSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationAudit {
    /// `slack_j = Σ_{k<j} (R_k - S_k)(X_{k+1} - X_k)` for `j = 2..=n` (one-based).
    pub slacks: Vec<f64>,
    /// Most negative slack (the inequality requires ≥ 0); 0 when all hold.
    pub max_violation: f64,
    /// Largest `|slack|` over kink indices, where equality is required.
    pub max_kink_gap: f64,
    /// `|slack_n|`: equality at the last index holds for every convex LSE.
    pub endpoint_gap: f64,
    /// `|R_n - S_n|`.
    pub total_gap: f64,
    /// Non-kink interior indices with strictly positive slack (allowed; reported).
    pub strict_non_kinks: usize,
}

impl CharacterizationAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation >= -tol && self.max_kink_gap <= tol && self.endpoint_gap <= tol
    }
}

/// Checks `Σ_{k<j} R_k ΔX_k ≥ Σ_{k<j} S_k ΔX_k` for every `j`, with
/// equality at kinks, where `R_k` and `S_k` are weighted partial sums of the
/// fitted values and responses.
pub fn characterization_audit(
    sample: &SortedSample,
    fit: &ConvexFit,
) -> Result<CharacterizationAudit> {
    let n = sample.len();
    if fit.fitted().len() != n {
        return Err(Error::LengthMismatch {
            what: "fitted",
            got: fit.fitted().len(),
            expected: n,
        });
    }
    let lambda = multipliers(sample.xs(), sample.ys(), sample.weights(), fit.fitted());
    let slacks: Vec<f64> = lambda[1..].to_vec();
    let max_violation = slacks.iter().copied().fold(0.0f64, f64::min);
    let mut is_kink = vec![false; n];
    for &k in fit.kinks() {
        is_kink[k] = true;
    }
    let max_kink_gap = fit
        .kinks()
        .iter()
        .map(|&k| lambda[k].abs())
        .fold(0.0f64, f64::max);
    let endpoint_gap = lambda[n - 1].abs();
    let total_gap = sample
        .ys()
        .iter()
        .zip(fit.fitted())
        .zip(sample.weights())
        .map(|((y, f), w)| w * (f - y))
        .sum::<f64>()
        .abs();
    let scale = 1e-10
        * sample
            .ys()
            .iter()
            .map(|y| y.abs())
            .fold(1.0f64, f64::max);
    let strict_non_kinks = (1..n.saturating_sub(1))
        .filter(|&j| !is_kink[j] && lambda[j] > scale)
        .count();
    Ok(CharacterizationAudit {
        slacks,
        max_violation,
        max_kink_gap,
        endpoint_gap,
        total_gap,
        strict_non_kinks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Piecewise;

    fn sample(xs: &[f64], ys: &[f64]) -> SortedSample {
        SortedSample::from_sorted(xs.to_vec(), ys.to_vec()).unwrap()
    }

    #[test]
    fn convex_input_is_unchanged() {
        let s = sample(&[0.0, 0.5, 1.0], &[1.0, 0.0, 1.0]);
        let fit = fit_convex(&s).unwrap();
        for (a, b) in fit.fitted().iter().zip([1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(fit.kinks(), &[1]);
    }

    #[test]
    fn concave_triple_projects_to_constant() {
        let s = sample(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]);
        for fit in [fit_convex(&s).unwrap(), brute_force_convex(&s).unwrap()] {
            for v in fit.fitted() {
                assert!((v - 1.0 / 3.0).abs() < 1e-12, "{v}");
            }
            assert!(fit.kinks().is_empty());
        }
    }

    #[test]
    fn affine_responses_are_fixed_points() {
        let xs = [0.1, 0.3, 0.35, 0.8, 0.9];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
        let fit = fit_convex(&sample(&xs, &ys)).unwrap();
        for (a, b) in fit.fitted().iter().zip(&ys) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_points_interpolate() {
        let s = sample(&[0.2, 0.6], &[1.0, -1.0]);
        let fit = fit_convex(&s).unwrap();
        assert_eq!(fit.fitted(), &[1.0, -1.0]);
        let audit = characterization_audit(&s, &fit).unwrap();
        // Only j = 2: R_1 - S_1 = 0.
        assert_eq!(audit.slacks.len(), 1);
        assert_eq!(audit.slacks[0], 0.0);
        assert!(fit_convex(&sample(&[0.5], &[1.0])).is_err());
    }

    #[test]
    fn extension_continues_boundary_segments() {
        let s = sample(&[0.25, 0.5, 0.75], &[1.0, 0.0, 1.0]);
        let fit = fit_convex(&s).unwrap();
        let ext = fit.extension();
        assert!((ext.eval(0.0) - 2.0).abs() < 1e-12);
        assert!((ext.eval(1.0) - 2.0).abs() < 1e-12);
        for (x, f) in s.xs().iter().zip(fit.fitted()) {
            assert!((ext.eval(*x) - f).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_case_has_zero_slacks() {
        let xs = [0.0, 0.2, 0.5, 0.7, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| (x - 0.4f64).powi(2)).collect();
        let s = sample(&xs, &ys);
        let fit = fit_convex(&s).unwrap();
        let audit = characterization_audit(&s, &fit).unwrap();
        assert!(audit.slacks.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(fit.kinks().len(), 3);
    }

    #[test]
    fn brute_force_rejects_large_samples() {
        let xs: Vec<f64> = (0..13).map(|i| i as f64 / 12.0).collect();
        let s = sample(&xs, &vec![0.0; 13]);
        assert!(matches!(brute_force_convex(&s), Err(Error::TooLarge { .. })));
    }
}

//! Best m-piece approximation of a signal by piecewise-constant (M_m) or
//! convex piecewise-linear (C_m) functions, with breakpoints on a grid.

use serde::{Deserialize, Serialize};

use super::function::{Piecewise, PiecewiseLinearFunction, StepFunction};
use super::loss::{for_each_merged_segment, l2_loss};
use crate::error::{invalid, Result};
use crate::numeric::{gl16, solve_tridiagonal};

/// Minimum number of candidate grid cells.
pub const MIN_GRID_SIZE: usize = 64;

const SLOPE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxFamily {
    /// Piecewise constant with at most m pieces.
    Constant,
    /// Continuous convex piecewise linear with at most m pieces.
    LinearConvex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Approximant {
    Step(StepFunction),
    Linear(PiecewiseLinearFunction),
}

impl Approximant {
    pub fn as_piecewise(&self) -> &dyn Piecewise {
        match self {
            Self::Step(f) => f,
            Self::Linear(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MPieceApproximation {
    pub approximant: Approximant,
    /// Squared L2(P) error of the approximant.
    pub error_sq: f64,
    /// Number of pieces actually used (≤ m).
    pub pieces: usize,
    /// True when the grid DP breakpoints had to be thinned to restore convexity.
    pub repaired: bool,
}

/// Uniform partition of [0, 1] into `cells` pieces; used only for merging.
struct UniformGrid {
    cells: usize,
}

impl Piecewise for UniformGrid {
    fn num_pieces(&self) -> usize {
        self.cells
    }
    fn boundary(&self, i: usize) -> f64 {
        if i >= self.cells {
            1.0
        } else {
            i as f64 / self.cells as f64
        }
    }
    fn eval_piece(&self, _piece: usize, _x: f64) -> f64 {
        0.0
    }
    fn piece_degree(&self, _piece: usize) -> usize {
        0
    }
    fn piece_at(&self, x: f64) -> usize {
        ((x * self.cells as f64).ceil() as usize).saturating_sub(1).min(self.cells - 1)
    }
}

/// Prefix sums of `∫ g`, `∫ g x` and `∫ g^2` over grid cells.
struct CellMoments {
    grid: usize,
    m0: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl CellMoments {
    fn new<G: Piecewise + ?Sized>(g: &G, grid: usize) -> Self {
        let mut c0 = vec![0.0; grid];
        let mut c1 = vec![0.0; grid];
        let mut c2 = vec![0.0; grid];
        let rule = gl16();
        let cells = UniformGrid { cells: grid };
        for_each_merged_segment(g, &cells, |a, b, gi, cell| {
            for (x, w) in rule.on_interval(a, b) {
                let v = g.eval_piece(gi, x);
                c0[cell] += w * v;
                c1[cell] += w * v * x;
                c2[cell] += w * v * v;
            }
        });
        let prefix = |c: &[f64]| {
            let mut out = Vec::with_capacity(c.len() + 1);
            out.push(0.0);
            let mut acc = 0.0;
            for v in c {
                acc += v;
                out.push(acc);
            }
            out
        };
        Self {
            grid,
            m0: prefix(&c0),
            m1: prefix(&c1),
            m2: prefix(&c2),
        }
    }

    fn span(&self, i: usize, j: usize) -> (f64, f64, f64, f64, f64) {
        let a = i as f64 / self.grid as f64;
        let b = j as f64 / self.grid as f64;
        (
            a,
            b,
            self.m0[j] - self.m0[i],
            self.m1[j] - self.m1[i],
            self.m2[j] - self.m2[i],
        )
    }

    /// Error of the best constant on cells `i..j` and that constant.
    fn constant_cost(&self, i: usize, j: usize) -> (f64, f64) {
        let (a, b, s0, _, s2) = self.span(i, j);
        let len = b - a;
        let mean = s0 / len;
        ((s2 - s0 * mean).max(0.0), mean)
    }

    /// Error of the best (unconstrained) line on cells `i..j`.
    fn linear_cost(&self, i: usize, j: usize) -> f64 {
        let (a, b, s0, s1, s2) = self.span(i, j);
        let len = b - a;
        let c = 0.5 * (a + b);
        let centered = s1 - c * s0;
        (s2 - s0 * s0 / len - centered * centered * 12.0 / (len * len * len)).max(0.0)
    }
}

/// Dynamic program over grid breakpoints: `cost[k][j]` is the best error
/// of covering cells `0..j` with exactly `k` segments.
struct SegmentDp {
    grid: usize,
    from: Vec<Vec<usize>>,
}

impl SegmentDp {
    fn run(moments: &CellMoments, max_pieces: usize, family: ApproxFamily) -> Self {
        let g = moments.grid;
        let seg_cost = |i: usize, j: usize| match family {
            ApproxFamily::Constant => moments.constant_cost(i, j).0,
            ApproxFamily::LinearConvex => moments.linear_cost(i, j),
        };
        let mut cost = vec![vec![f64::INFINITY; g + 1]; max_pieces + 1];
        let mut from = vec![vec![0usize; g + 1]; max_pieces + 1];
        cost[0][0] = 0.0;
        // Segment costs are reused for every k.
        let mut table = vec![0.0; (g + 1) * (g + 1)];
        for i in 0..g {
            for j in i + 1..=g {
                table[i * (g + 1) + j] = seg_cost(i, j);
            }
        }
        for k in 1..=max_pieces {
            for j in k..=g {
                let mut best = f64::INFINITY;
                let mut arg = k - 1;
                for i in k - 1..j {
                    let prev = cost[k - 1][i];
                    if prev.is_finite() {
                        let c = prev + table[i * (g + 1) + j];
                        if c < best {
                            best = c;
                            arg = i;
                        }
                    }
                }
                cost[k][j] = best;
                from[k][j] = arg;
            }
        }
        Self { grid: g, from }
    }

    /// Grid indices of the segment boundaries (including 0 and grid) for `k` pieces.
    fn boundaries(&self, k: usize) -> Vec<usize> {
        let mut out = vec![self.grid];
        let mut j = self.grid;
        for level in (1..=k).rev() {
            j = self.from[level][j];
            out.push(j);
        }
        out.reverse();
        out
    }
}

fn check_args(m: usize, grid_size: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    if grid_size < MIN_GRID_SIZE {
        return Err(invalid(
            "grid_size",
            format!("must be at least {MIN_GRID_SIZE}"),
        ));
    }
    if m > grid_size {
        return Err(invalid("m", format!("m = {m} exceeds grid_size = {grid_size}")));
    }
    Ok(())
}

fn step_from_boundaries(moments: &CellMoments, cuts: &[usize]) -> Result<StepFunction> {
    let grid = moments.grid as f64;
    let mut breakpoints = Vec::with_capacity(cuts.len() - 1);
    let mut values = Vec::with_capacity(cuts.len() - 1);
    for w in cuts.windows(2) {
        breakpoints.push(w[1] as f64 / grid);
        values.push(moments.constant_cost(w[0], w[1]).1);
    }
    if values.windows(2).all(|w| w[1] >= w[0]) {
        StepFunction::isotonic(breakpoints, values)
    } else {
        StepFunction::new(breakpoints, values)
    }
}

/// L2 projection of `g` onto continuous linear splines with the given knots.
fn project_onto_splines<G: Piecewise + ?Sized>(g: &G, knots: &[f64]) -> Result<Vec<f64>> {
    let k = knots.len();
    let mut diag = vec![0.0; k];
    let mut off = vec![0.0; k - 1];
    for i in 0..k - 1 {
        let h = knots[i + 1] - knots[i];
        diag[i] += h / 3.0;
        diag[i + 1] += h / 3.0;
        off[i] = h / 6.0;
    }
    let mut rhs = vec![0.0; k];
    let partition = PiecewiseLinearFunction::new(knots.to_vec(), vec![0.0; k])?;
    let rule = gl16();
    for_each_merged_segment(g, &partition, |a, b, gi, piece| {
        let (t0, t1) = (knots[piece], knots[piece + 1]);
        for (x, w) in rule.on_interval(a, b) {
            let v = w * g.eval_piece(gi, x);
            let lam = (x - t0) / (t1 - t0);
            rhs[piece] += v * (1.0 - lam);
            rhs[piece + 1] += v * lam;
        }
    });
    solve_tridiagonal(&diag, &off, &rhs)
}

/// Projects onto splines with the given knots, dropping the knot with the
/// most negative slope change until the result is convex.
fn convex_spline_fit<G: Piecewise + ?Sized>(
    g: &G,
    mut knots: Vec<f64>,
) -> Result<(PiecewiseLinearFunction, bool)> {
    let mut repaired = false;
    loop {
        let values = project_onto_splines(g, &knots)?;
        let slopes: Vec<f64> = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        let worst = slopes
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i + 1, w[1] - w[0], 1.0f64.max(w[0].abs()).max(w[1].abs())))
            .filter(|&(_, d, scale)| d < -SLOPE_TOL * scale)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            None => return Ok((PiecewiseLinearFunction::convex(knots, values)?, repaired)),
            Some((knot, _, _)) => {
                knots.remove(knot);
                repaired = true;
            }
        }
    }
}

fn linear_from_boundaries<G: Piecewise + ?Sized>(
    g: &G,
    grid: usize,
    cuts: &[usize],
) -> Result<(PiecewiseLinearFunction, bool)> {
    let knots: Vec<f64> = cuts.iter().map(|&c| c as f64 / grid as f64).collect();
    convex_spline_fit(g, knots)
}

fn approximation_for<G: Piecewise + ?Sized>(
    g: &G,
    moments: &CellMoments,
    dp: &SegmentDp,
    m: usize,
    family: ApproxFamily,
) -> Result<MPieceApproximation> {
    let cuts = dp.boundaries(m);
    match family {
        ApproxFamily::Constant => {
            let f = step_from_boundaries(moments, &cuts)?;
            let error_sq = l2_loss(&f, g);
            Ok(MPieceApproximation {
                pieces: f.values().len(),
                approximant: Approximant::Step(f),
                error_sq,
                repaired: false,
            })
        }
        ApproxFamily::LinearConvex => {
            let (f, repaired) = linear_from_boundaries(g, dp.grid, &cuts)?;
            let error_sq = l2_loss(&f, g);
            Ok(MPieceApproximation {
                pieces: f.knots().len() - 1,
                approximant: Approximant::Linear(f),
                error_sq,
                repaired,
            })
        }
    }
}

/// Best approximation of `g` with at most `m` pieces from `family`, using
/// breakpoints on the grid `{k / grid_size}`.
///
/// For the constant family this is the exact optimum over grid breakpoints.
/// For the convex family the grid DP picks knots for unconstrained segment
/// lines, then the continuous spline projection on those knots is thinned
/// until convex; the error is therefore an upper bound on the infimum.
pub fn best_m_piece_approximation<G: Piecewise + ?Sized>(
    g: &G,
    m: usize,
    family: ApproxFamily,
    grid_size: usize,
) -> Result<MPieceApproximation> {
    check_args(m, grid_size)?;
    let curve = m_piece_approximations(g, m, family, grid_size)?;
    Ok(curve.into_iter().last().expect("m >= 1"))
}

/// Approximations for every `m = 1..=m_max`. Entry `m - 1` is the best
/// member found with at most `m` pieces, so errors are non-increasing in `m`.
pub fn m_piece_approximations<G: Piecewise + ?Sized>(
    g: &G,
    m_max: usize,
    family: ApproxFamily,
    grid_size: usize,
) -> Result<Vec<MPieceApproximation>> {
    check_args(m_max, grid_size)?;
    let moments = CellMoments::new(g, grid_size);
    let dp = SegmentDp::run(&moments, m_max, family);
    let mut out: Vec<MPieceApproximation> = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let candidate = approximation_for(g, &moments, &dp, m, family)?;
        let keep_previous = out
            .last()
            .is_some_and(|prev| prev.error_sq <= candidate.error_sq);
        if keep_previous {
            let prev = out.last().unwrap().clone();
            out.push(prev);
        } else {
            out.push(candidate);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SignalSpec;

    #[test]
    fn best_constant_is_the_mean() {
        let r = best_m_piece_approximation(&SignalSpec::identity(), 1, ApproxFamily::Constant, 64)
            .unwrap();
        assert!((r.error_sq - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn two_constants_on_identity() {
        let r = best_m_piece_approximation(&SignalSpec::identity(), 2, ApproxFamily::Constant, 64)
            .unwrap();
        assert!((r.error_sq - 1.0 / 48.0).abs() < 1e-14);
        match r.approximant {
            Approximant::Step(f) => {
                assert_eq!(f.breakpoints(), &[0.5, 1.0]);
                assert!(f.is_isotonic());
            }
            _ => panic!("expected a step function"),
        }
    }

    #[test]
    fn affine_signal_is_its_own_convex_approximation() {
        let r = best_m_piece_approximation(
            &SignalSpec::linear(0.3, -2.0),
            1,
            ApproxFamily::LinearConvex,
            64,
        )
        .unwrap();
        assert!(r.error_sq < 1e-24);
        assert!(!r.repaired);
    }

    #[test]
    fn step_train_on_grid_is_recovered_exactly() {
        let g = SignalSpec::step_train(vec![0.25, 0.75], vec![-1.0, 0.0, 2.0]).unwrap();
        let r = best_m_piece_approximation(&g, 3, ApproxFamily::Constant, 64).unwrap();
        assert!(r.error_sq < 1e-24);
    }

    #[test]
    fn concave_signal_gets_repaired_toward_convexity() {
        let g = SignalSpec::polynomial(vec![0.0, 0.0, -1.0]).unwrap();
        let r = best_m_piece_approximation(&g, 4, ApproxFamily::LinearConvex, 64).unwrap();
        match &r.approximant {
            Approximant::Linear(f) => assert!(f.is_convex()),
            _ => panic!("expected piecewise linear"),
        }
        // The only convex fits of a concave parabola are affine.
        let affine = best_m_piece_approximation(&g, 1, ApproxFamily::LinearConvex, 64).unwrap();
        assert!((r.error_sq - affine.error_sq).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let g = SignalSpec::identity();
        assert!(best_m_piece_approximation(&g, 0, ApproxFamily::Constant, 64).is_err());
        assert!(best_m_piece_approximation(&g, 2, ApproxFamily::Constant, 32).is_err());
        assert!(best_m_piece_approximation(&g, 65, ApproxFamily::Constant, 64).is_err());
    }
}

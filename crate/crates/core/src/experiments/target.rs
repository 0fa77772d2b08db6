use serde::{Deserialize, Serialize};

use crate::additive::{BivariateSignal, Shape};
use crate::convex::fit_convex;
use crate::domain::{Piecewise, PiecewiseLinearFunction, SignalSpec, SortedSample, StepFunction};
use crate::error::{invalid, Result};
use crate::isotonic::fit_isotonic;
use crate::numeric::gl64;

/// `base(x) + shift + slope · x`; the `x` marginal of an additive signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSignal {
    pub base: SignalSpec,
    pub shift: f64,
    pub slope: f64,
}

impl MarginalSignal {
    pub fn plain(base: SignalSpec) -> Self {
        Self {
            base,
            shift: 0.0,
            slope: 0.0,
        }
    }

    /// `x ↦ ∫ φ0(x, z) dz`, integrating the `z` terms with 64-point
    /// Gauss–Legendre.
    pub fn of(phi: &BivariateSignal) -> Self {
        let rule = gl64();
        Self {
            base: phi.x_part.clone(),
            shift: rule.integrate(0.0, 1.0, |z| phi.z_part.eval(z)),
            slope: rule.integrate(0.0, 1.0, |z| phi.interaction * z),
        }
    }
}

impl Piecewise for MarginalSignal {
    fn num_pieces(&self) -> usize {
        self.base.num_pieces()
    }

    fn boundary(&self, i: usize) -> f64 {
        self.base.boundary(i)
    }

    fn eval_piece(&self, piece: usize, x: f64) -> f64 {
        self.base.eval_piece(piece, x) + self.shift + self.slope * x
    }

    fn piece_degree(&self, piece: usize) -> usize {
        let d = self.base.piece_degree(piece);
        if self.slope != 0.0 {
            d.max(1)
        } else {
            d
        }
    }

    fn piece_at(&self, x: f64) -> usize {
        self.base.piece_at(x)
    }
}

/// Loss target: `f0` itself when it lies in the shape class, otherwise its
/// discrete projection.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Signal(MarginalSignal),
    Step(StepFunction),
    Linear(PiecewiseLinearFunction),
}

impl Target {
    pub fn as_piecewise(&self) -> &dyn Piecewise {
        match self {
            Self::Signal(f) => f,
            Self::Step(f) => f,
            Self::Linear(f) => f,
        }
    }
}

/// Discrete `L2` projection of `f0` onto the shape class.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Star {
    /// Cell midpoints `(k + 1/2) / grid_size`.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub projected: Vec<f64>,
    /// Step (isotonic) or piecewise-linear (convex) proxy through the projection.
    pub proxy: Target,
    /// Whether the projection left the grid values unchanged.
    pub in_class: bool,
}

/// Projects `f0` evaluated on an equispaced grid onto the isotonic or
/// convex cone with uniform weights.
pub fn compute_f0_star<G: Piecewise + ?Sized>(f0: &G, shape: Shape, grid_size: usize) -> Result<F0Star> {
    if grid_size < 256 {
        return Err(invalid("grid_size", format!("must be at least 256, got {grid_size}")));
    }
    let grid: Vec<f64> = (0..grid_size)
        .map(|k| (k as f64 + 0.5) / grid_size as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| f0.eval(x)).collect();
    let (projected, proxy) = discrete_projection(&grid, &values, shape)?;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let in_class = projected
        .iter()
        .zip(&values)
        .all(|(p, v)| (p - v).abs() <= 1e-12 * scale);
    Ok(F0Star {
        grid,
        values,
        projected,
        proxy,
        in_class,
    })
}

/// Shape-constrained least squares of `values` at the strictly increasing `grid`.
pub fn discrete_projection(grid: &[f64], values: &[f64], shape: Shape) -> Result<(Vec<f64>, Target)> {
    let sample = SortedSample::from_sorted(grid.to_vec(), values.to_vec())?;
    Ok(match shape {
        Shape::Isotonic => {
            let fit = fit_isotonic(&sample)?;
            (fit.fitted().to_vec(), Target::Step(fit.into_extension()))
        }
        Shape::Convex => {
            let fit = fit_convex(&sample)?;
            (fit.fitted().to_vec(), Target::Linear(fit.into_extension()))
        }
    })
}

/// The loss target for `f0` under `shape`: exact when `f0` is in the class.
pub fn loss_target(f0: MarginalSignal, shape: Shape, grid_size: usize) -> Result<(Target, bool)> {
    let star = compute_f0_star(&f0, shape, grid_size)?;
    if star.in_class {
        Ok((Target::Signal(f0), true))
    } else {
        Ok((star.proxy, false))
    }
}

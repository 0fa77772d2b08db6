//! Shared domain types: samples, piecewise function representations,
//! signals, exact L2(P) losses and m-piece oracle approximations.

mod approx;
mod function;
mod loss;
mod sample;
mod signal;

pub use approx::{
    best_m_piece_approximation, m_piece_approximations, ApproxFamily, Approximant,
    MPieceApproximation, MIN_GRID_SIZE,
};
pub use function::{Piecewise, PiecewiseLinearFunction, StepFunction};
pub use loss::{for_each_merged_segment, l2_loss, l2_norm_sq, Zero};
pub use sample::SortedSample;
pub use signal::SignalSpec;

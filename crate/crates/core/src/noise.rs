//! Error laws: samplers, survival functions `P(|ξ| > t)` and `L_{p,1}` norms.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::numeric::gl16;

/// A symmetric error distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorLaw {
    Gaussian { sigma: f64 },
    /// `scale * T_nu`.
    StudentT { nu: f64, scale: f64 },
    /// Characteristic function `exp(-|scale * t|^alpha)`.
    SymStable { alpha: f64, scale: f64 },
    /// `P(|η| > t) = 1 / (1 + (t / scale)^2)`, symmetric sign.
    ParetoEta { scale: f64 },
}

impl ErrorLaw {
    pub fn gaussian(sigma: f64) -> Self {
        Self::Gaussian { sigma }
    }

    pub fn student_t(nu: f64, scale: f64) -> Self {
        Self::StudentT { nu, scale }
    }

    pub fn sym_stable(alpha: f64, scale: f64) -> Self {
        Self::SymStable { alpha, scale }
    }

    pub fn pareto_eta(scale: f64) -> Self {
        Self::ParetoEta { scale }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            // sigma = 0 is the noiseless law.
            Self::Gaussian { sigma } if sigma == 0.0 => Ok(()),
            Self::Gaussian { sigma } => positive("sigma", sigma),
            Self::StudentT { nu, scale } => {
                positive("nu", nu)?;
                positive("scale", scale)
            }
            Self::SymStable { alpha, scale } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(invalid("alpha", format!("must lie in (0, 2], got {alpha}")));
                }
                positive("scale", scale)
            }
            Self::ParetoEta { scale } => positive("scale", scale),
        }
    }

    pub fn scale(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma } => sigma,
            Self::StudentT { scale, .. }
            | Self::SymStable { scale, .. }
            | Self::ParetoEta { scale } => scale,
        }
    }

    /// Same law with a different scale parameter.
    pub fn with_scale(&self, scale: f64) -> Self {
        match *self {
            Self::Gaussian { .. } => Self::Gaussian { sigma: scale },
            Self::StudentT { nu, .. } => Self::StudentT { nu, scale },
            Self::SymStable { alpha, .. } => Self::SymStable { alpha, scale },
            Self::ParetoEta { .. } => Self::ParetoEta { scale },
        }
    }

    /// Power-law tail index `κ` with `P(|ξ| > t) ~ C t^{-κ}`; `None` when the
    /// tail is lighter than every power.
    pub fn tail_exponent(&self) -> Option<f64> {
        match *self {
            Self::Gaussian { .. } => None,
            Self::StudentT { nu, .. } => Some(nu),
            Self::SymStable { alpha, .. } => (alpha < 2.0).then_some(alpha),
            Self::ParetoEta { .. } => Some(2.0),
        }
    }

    /// One draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { sigma } => {
                let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
                sigma * z
            }
            Self::StudentT { nu, scale } => {
                let t: f64 = StudentT::new(nu).expect("validated nu").sample(rng);
                scale * t
            }
            Self::SymStable { alpha, scale } => scale * stable_standard(alpha, rng),
            Self::ParetoEta { scale } => {
                let u = 1.0 - rng.random::<f64>();
                let magnitude = scale * (1.0 / u - 1.0).sqrt();
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    /// Like [`draw`](Self::draw), but Gaussian laws go through the
    /// Chambers–Mallows–Stuck map at `α = 2` (exactly `N(0, 2)` before
    /// scaling). Stable and Gaussian laws then consume the generator
    /// identically, so paired arms on one seed share their uniforms.
    pub fn draw_coupled<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { sigma } => sigma * FRAC_1_SQRT_2 * stable_standard(2.0, rng),
            _ => self.draw(rng),
        }
    }

    /// `n` i.i.d. draws, fully determined by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.draw(&mut rng)).collect())
    }

    /// Fills `out` with draws from `rng`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.draw(rng);
        }
    }

    /// `P(|ξ| > t)`. Exact for the Gaussian, Student-t and Pareto laws; by
    /// characteristic-function inversion (or the large-`t` tail series) for
    /// stable laws.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Gaussian { sigma } if sigma == 0.0 => 0.0,
            Self::Gaussian { sigma } => erfc(t / (sigma * SQRT_2)),
            Self::StudentT { nu, scale } => {
                let x = t / scale;
                beta_reg(0.5 * nu, 0.5, nu / (nu + x * x))
            }
            Self::SymStable { alpha, scale } => stable_survival(alpha, t / scale),
            Self::ParetoEta { scale } => {
                let x = t / scale;
                1.0 / (1.0 + x * x)
            }
        }
    }

    /// `‖ξ‖_{p,1} = ∫_0^∞ P(|ξ| > t)^{1/p} dt`; `+∞` when the tail index does
    /// not exceed `p`.
    pub fn lp1_norm(&self, p: f64) -> Result<f64> {
        self.validate()?;
        if !(p >= 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must be >= 1, got {p}")));
        }
        if let Some(kappa) = self.tail_exponent() {
            if kappa <= p {
                return Ok(f64::INFINITY);
            }
        }
        let scale = self.scale();
        if scale == 0.0 {
            return Ok(0.0);
        }
        let integrand = |t: f64| self.survival(t).powf(1.0 / p);
        let rule = gl16();
        // Geometric panels: [0, s/8], then ratio 1.25 outward.
        let mut a = 0.0;
        let mut b = scale / 8.0;
        let mut total = 0.0;
        let t_max = scale * 1e4;
        loop {
            total += rule.integrate(a, b, integrand);
            if self.tail_exponent().is_none() && integrand(b) < 1e-18 {
                return Ok(total);
            }
            if b >= t_max {
                break;
            }
            a = b;
            b = (b * 1.25).min(t_max);
        }
        // Analytic power tail beyond t_max.
        let kappa = self.tail_exponent().expect("light tails return above");
        let coeff = self.survival(t_max) * t_max.powf(kappa);
        let r = kappa / p;
        total += coeff.powf(1.0 / p) * t_max.powf(1.0 - r) / (r - 1.0);
        Ok(total)
    }
}

/// Chambers–Mallows–Stuck draw with characteristic function `exp(-|t|^alpha)`.
fn stable_standard<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let first = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let second = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    first * second
}

/// `P(|X| > x)` for the standard symmetric stable law.
fn stable_survival(alpha: f64, x: f64) -> f64 {
    if alpha >= 2.0 {
        // exp(-t^2) is N(0, 2).
        return erfc(x / 2.0);
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return 1.0 - 2.0 * x.atan() / PI;
    }
    if x >= 20.0 {
        return stable_tail_series(alpha, x, 8);
    }
    // Gil-Pelaez: P(|X| <= x) = (2/π) ∫_0^∞ sin(ux)/u · exp(-u^α) du.
    let upper = 60f64.powf(1.0 / alpha);
    let panels = ((upper * x.max(1.0) / FRAC_PI_2).ceil() as usize).max(64);
    let rule = gl16();
    let h = upper / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let a = k as f64 * h;
        acc += rule.integrate(a, a + h, |u| {
            let s = if u == 0.0 { x } else { (u * x).sin() / u };
            s * (-u.powf(alpha)).exp()
        });
    }
    (1.0 - 2.0 * acc / PI).clamp(0.0, 1.0)
}

/// Large-`x` expansion `(2/π) Σ (-1)^{k+1} Γ(αk)/k! sin(kπα/2) x^{-αk}`.
fn stable_tail_series(alpha: f64, x: f64, terms: usize) -> f64 {
    let mut acc = 0.0;
    for k in 1..=terms {
        let kf = k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let mag = (ln_gamma(alpha * kf) - ln_gamma(kf + 1.0) - alpha * kf * x.ln()).exp();
        acc += sign * mag * (kf * PI * alpha / 2.0).sin();
    }
    2.0 * acc / PI
}

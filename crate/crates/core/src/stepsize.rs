//! Step-size and extrapolation calculus.
//!
//! For constants `L_f1` (Lipschitz constant of `∇f₁`), `L_h` (of `∇h`) and the
//! lower-curvature constant `l` of `f₁`, the method is certified when
//!
//! ```text
//! 0 < γ < 1/(L_f1 + L_h),    0 ≤ α < Λ(γ) = (1 − γl − 2γL_h)/(2 + γL_h) − γ²L_f1²
//! ```
//!
//! and then the energy decreases by at least
//! `(Λ − τ)(1/γ + L_h/2)‖Δy‖² + ξ‖Δx‖²` per iteration for any `τ ∈ (α, Λ)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smoothness constants of the `f₁` and `h` terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Constants {
    /// Lipschitz constant of `∇f₁`.
    pub l_f1: f64,
    /// Lipschitz constant of `∇h`.
    pub l_h: f64,
    /// Lower curvature of `f₁`: `f₁ + (l/2)‖·‖²` is convex.
    pub l: f64,
}

impl Constants {
    pub fn new(l_f1: f64, l_h: f64, l: f64) -> Self {
        Constants { l_f1, l_h, l }
    }
}

/// `Λ(γ) = (1 − γl − 2γL_h)/(2 + γL_h) − γ²L_f1²`.
pub fn lambda_of_gamma(gamma: f64, l_f1: f64, l_h: f64, l: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok((1.0 - gamma * l - 2.0 * gamma * l_h) / (2.0 + gamma * l_h) - gamma * gamma * l_f1 * l_f1)
}

/// Upper end `γ̄` of the certified step-size interval.
///
/// With `L_h = 0` this is `min(1/L_f1, (−l + √(l² + 8L_f1²))/(4L_f1²))`, the
/// exact positive root of `Λ`. With `L_h > 0` it is `min(1/(L_f1+L_h), γ₀)` where
/// `γ₀` is the positive root of `(L_hL_f1 + L_f1²)γ² + (2L_h + L_f1 + l)γ − 1`,
/// a sufficient (conservative) bound.
pub fn gamma_threshold(l_f1: f64, l_h: f64, l: f64) -> Result<f64> {
    if !(l_f1 > 0.0) || !l_f1.is_finite() {
        return Err(Error::InvalidParameter(format!("L_f1 must be positive, got {l_f1}")));
    }
    if !(l_h >= 0.0) || !l_h.is_finite() {
        return Err(Error::InvalidParameter(format!("L_h must be nonnegative, got {l_h}")));
    }
    if !l.is_finite() {
        return Err(Error::InvalidParameter("l must be finite".into()));
    }
    let g = if l_h == 0.0 {
        let root = (-l + (l * l + 8.0 * l_f1 * l_f1).sqrt()) / (4.0 * l_f1 * l_f1);
        root.min(1.0 / l_f1)
    } else {
        let a = l_h * l_f1 + l_f1 * l_f1;
        let b = 2.0 * l_h + l_f1 + l;
        let g0 = (-b + (b * b + 4.0 * a).sqrt()) / (2.0 * a);
        g0.min(1.0 / (l_f1 + l_h))
    };
    Ok(g)
}

/// `ξ(α, γ) = α/γ + αL_h − α²L_h/2 − γα²L_h²/2 − α²L_h/(2τ) − α²/(τγ)`.
pub fn xi_of(alpha: f64, gamma: f64, l_h: f64, tau: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let a2 = alpha * alpha;
    Ok(alpha / gamma + alpha * l_h
        - a2 * l_h / 2.0
        - gamma * a2 * l_h * l_h / 2.0
        - a2 * l_h / (2.0 * tau)
        - a2 / (tau * gamma))
}

/// Constants `(L_f1, l)` of `f₁ = φ_σ/γ` for a gradient-step denoiser with
/// Lipschitz constant `L`: `(L/(γ(1−L)), L/(γ(L+1)))`.
pub fn pnp_nonsmooth_constants(lip: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&lip) {
        return Err(Error::InvalidParameter(format!(
            "denoiser Lipschitz constant must lie in [0, 1), got {lip}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok((lip / (gamma * (1.0 - lip)), lip / (gamma * (lip + 1.0))))
}

/// Largest certified `γ` when `f₁ = φ_σ/γ` (the denoiser in the first slot).
///
/// Because `L_f1` and `l` scale like `1/γ`, the conditions reduce to
/// `κ + γL_h < 1` and `γL_h(2 + κ²) < 1 − ρ − 2κ²` with `κ = L/(1−L)` and
/// `ρ = L/(1+L)`. Returns `f64::INFINITY` when `L_h = 0` and the denoiser
/// alone is admissible.
pub fn pnp_nonsmooth_gamma_threshold(lip: f64, l_h: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&lip) {
        return Err(Error::InvalidParameter(format!(
            "denoiser Lipschitz constant must lie in [0, 1), got {lip}"
        )));
    }
    let kappa = lip / (1.0 - lip);
    let rho = lip / (1.0 + lip);
    let slack = 1.0 - rho - 2.0 * kappa * kappa;
    if kappa >= 1.0 || slack <= 0.0 {
        return Err(Error::Uncertified(format!(
            "denoiser with L={lip} admits no certified step size in the first slot"
        )));
    }
    if l_h == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((1.0 - kappa) / l_h).min(slack / (l_h * (2.0 + kappa * kappa))))
}

/// Step size, extrapolation weight and the derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepParams {
    gamma: f64,
    alpha: f64,
    tau: f64,
    lambda_gamma: f64,
    xi: f64,
    constants: Constants,
    certified: bool,
}

impl StepParams {
    /// Validates the step-size conditions; `τ` is the midpoint of `(α, Λ(γ))`.
    pub fn certified(gamma: f64, alpha: f64, constants: Constants) -> Result<Self> {
        let p = Self::build(gamma, alpha, constants)?;
        let Constants { l_f1, l_h, .. } = constants;
        if l_f1 + l_h > 0.0 && gamma * (l_f1 + l_h) >= 1.0 {
            return Err(Error::Uncertified(format!(
                "gamma={gamma} must be below 1/(L_f1+L_h)={}",
                1.0 / (l_f1 + l_h)
            )));
        }
        if alpha >= p.lambda_gamma {
            return Err(Error::Uncertified(format!(
                "alpha={alpha} must be below Lambda(gamma)={}",
                p.lambda_gamma
            )));
        }
        if alpha > 0.0 && !(p.xi > 0.0) {
            return Err(Error::Uncertified(format!("xi={} is not positive", p.xi)));
        }
        Ok(p)
    }

    /// No step-size conditions beyond `γ > 0`, `α ≥ 0`. Energy checks on runs
    /// with such parameters are informational only.
    pub fn uncertified(gamma: f64, alpha: f64, constants: Constants) -> Result<Self> {
        let mut p = Self::build(gamma, alpha, constants)?;
        p.certified = false;
        Ok(p)
    }

    fn build(gamma: f64, alpha: f64, constants: Constants) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be nonnegative, got {alpha}")));
        }
        let Constants { l_f1, l_h, l } = constants;
        for (name, v) in [("L_f1", l_f1), ("L_h", l_h)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        let lambda_gamma = lambda_of_gamma(gamma, l_f1, l_h, l)?;
        let tau = 0.5 * (alpha + lambda_gamma);
        let xi = if tau > 0.0 { xi_of(alpha, gamma, l_h, tau)? } else { f64::NAN };
        Ok(StepParams {
            gamma,
            alpha,
            tau,
            lambda_gamma,
            xi,
            constants,
            certified: true,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn lambda_gamma(&self) -> f64 {
        self.lambda_gamma
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn constants(&self) -> Constants {
        self.constants
    }
    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// Coefficient `(Λ − τ)(1/γ + L_h/2)` of `‖Δy‖²` in the descent bound.
    pub fn dy_coefficient(&self) -> f64 {
        (self.lambda_gamma - self.tau) * (1.0 / self.gamma + self.constants.l_h / 2.0)
    }

    /// Copy with a different extrapolation weight, keeping the certification mode.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if self.certified {
            Self::certified(self.gamma, alpha, self.constants)
        } else {
            Self::uncertified(self.gamma, alpha, self.constants)
        }
    }
}

/// `γ = 0.99·γ̄`, `α = alpha_fraction·Λ(γ)`, certified.
///
/// `L_f1 = 0` is accepted (forward–backward case), in which case `γ̄` is the
/// root of `1 − γl − 2γL_h` capped by `1/L_h`.
pub fn default_params(l_f1: f64, l_h: f64, l: f64, alpha_fraction: f64) -> Result<StepParams> {
    if !(0.0..1.0).contains(&alpha_fraction) {
        return Err(Error::InvalidParameter(format!(
            "alpha_fraction must lie in [0, 1), got {alpha_fraction}"
        )));
    }
    let bar = if l_f1 == 0.0 {
        let a = l + 2.0 * l_h;
        let mut g = f64::INFINITY;
        if a > 0.0 {
            g = 1.0 / a;
        }
        if l_h > 0.0 {
            g = g.min(1.0 / l_h);
        }
        if !g.is_finite() {
            return Err(Error::InvalidParameter(
                "step size is unbounded for these constants; pass gamma explicitly".into(),
            ));
        }
        g
    } else {
        gamma_threshold(l_f1, l_h, l)?
    };
    certified_at(0.99 * bar, alpha_fraction, Constants::new(l_f1, l_h, l))
}

/// Certified parameters at a given `γ` with `α = alpha_fraction·Λ(γ)`.
pub fn certified_at(gamma: f64, alpha_fraction: f64, constants: Constants) -> Result<StepParams> {
    if !(0.0..1.0).contains(&alpha_fraction) {
        return Err(Error::InvalidParameter(format!(
            "alpha_fraction must lie in [0, 1), got {alpha_fraction}"
        )));
    }
    let Constants { l_f1, l_h, l } = constants;
    let lambda = lambda_of_gamma(gamma, l_f1, l_h, l)?;
    if lambda <= 0.0 {
        return Err(Error::Uncertified(format!("Lambda(gamma)={lambda} is not positive at gamma={gamma}")));
    }
    StepParams::certified(gamma, alpha_fraction * lambda, constants)
}

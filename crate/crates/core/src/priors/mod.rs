//! Regularizers, data terms and gradient-step denoisers.

mod denoiser;
mod quadratic;
mod simple;
mod tv;
pub mod weights;

pub use denoiser::{
    gaussian_smoother, linear_denoiser, phi_sigma_eval, secant_violations, weak_convexity_certificate, DenoiserPrior,
    DenoiserSlot, GradStepDenoiser, LinearPotential, PhiSigma, Potential,
};
pub use quadratic::{ls_prox, DiagonalQuadratic, LeastSquares, LinearOperator, LogCosh, Tikhonov};
pub use simple::{box_prox, AsProx, BoxIndicator, L1Norm};
pub use tv::{total_variation, tv_prox, HuberTv, TotalVariation, TV_MAX_INNER};
pub use weights::ConvPotential;

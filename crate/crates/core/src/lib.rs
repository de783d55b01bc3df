//! Extrapolated Davis–Yin splitting for `min f₁(x) + f₂(x) + h(x)` with
//! nonconvex terms, its Plug-and-Play variants built on gradient-step
//! denoisers, and runtime verification of the energy that certifies descent.

pub mod energy;
pub mod cli;
pub mod error;
pub mod imaging;
pub mod priors;
pub mod problem;
pub mod solver;
pub mod stepsize;
pub mod tensor;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/splitting.md")]
    mod splitting {}
    #[doc = include_str!("../../../book/src/step-sizes.md")]
    mod step_sizes {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/pnp.md")]
    mod pnp {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

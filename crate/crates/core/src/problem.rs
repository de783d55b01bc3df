//! The three-term objective `F = f₁ + f₂ + h`.
//!
//! `f₁` and `h` are [`SmoothTerm`]s (value, gradient, Lipschitz constant and a
//! lower-curvature constant `l` such that `f + (l/2)‖·‖²` is convex). `f₂` is a
//! [`ProxableTerm`] whose value may be `+∞` (indicators), represented by
//! [`Value::Infinite`] rather than a floating-point infinity.

use std::fmt;
use std::ops::Add;

use crate::error::{Error, Result};
use crate::solver::DysState;
use crate::tensor::Tensor;

/// An extended real value: finite, or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Finite(f64),
    Infinite,
}

impl Value {
    pub fn is_finite(self) -> bool {
        matches!(self, Value::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Value::Finite(v) => Some(v),
            Value::Infinite => None,
        }
    }

    /// Finite value or panic; for terms that are finite everywhere.
    pub fn unwrap(self) -> f64 {
        self.finite().expect("value is +inf")
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Finite(v)
    }
}

impl Add for Value {
    type Output = Value;
    fn add(self, rhs: Value) -> Value {
        match (self, rhs) {
            (Value::Finite(a), Value::Finite(b)) => Value::Finite(a + b),
            _ => Value::Infinite,
        }
    }
}

impl Add<f64> for Value {
    type Output = Value;
    fn add(self, rhs: f64) -> Value {
        self + Value::Finite(rhs)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Finite(v) => write!(f, "{v}"),
            Value::Infinite => f.write_str("inf"),
        }
    }
}

/// A continuously differentiable term with Lipschitz gradient.
pub trait SmoothTerm: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, x: &Tensor) -> f64;

    fn gradient(&self, x: &Tensor) -> Tensor;

    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;

    /// A constant `l` with `term + (l/2)‖·‖²` convex.
    fn lower_curvature(&self) -> f64;

    /// Bound `M` on the spectral norm of the Hessian, when twice differentiable.
    fn hessian_bound(&self) -> Option<f64> {
        None
    }

    /// Hessian-vector product `∇²f(x) v`, when available.
    fn hessian_apply(&self, _x: &Tensor, _v: &Tensor) -> Option<Tensor> {
        None
    }

    /// `Prox_{γ f}(x)`. The default minimizes `f(u) + ‖u − x‖²/(2γ)` by
    /// gradient descent, which is well posed whenever `γ l < 1`.
    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        smooth_prox_descent(self, gamma, x)
    }
}

/// A proper closed term with a computable proximal map.
pub trait ProxableTerm: Send + Sync {
    fn name(&self) -> &str;

    fn value(&self, x: &Tensor) -> Value;

    /// One minimizer of `f(u) + ‖u − x‖²/(2γ)`.
    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor>;
}

const PROX_DESCENT_MAX_ITER: usize = 20_000;

/// Minimizes `f(u) + ‖u − x‖²/(2γ)` for a smooth `f` by gradient descent with
/// step `1/(L + 1/γ)`, started at `x`.
pub fn smooth_prox_descent<T: SmoothTerm + ?Sized>(term: &T, gamma: f64, x: &Tensor) -> Result<Tensor> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let inv = 1.0 / gamma;
    if term.lower_curvature() * gamma >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "prox of `{}` is not strongly convex at gamma={gamma}",
            term.name()
        )));
    }
    let step = 1.0 / (term.lipschitz() + inv);
    let scale = 1.0 + term.gradient(x).norm() + x.norm() * inv;
    let tol = 1e-13 * scale;
    let mut u = x.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..PROX_DESCENT_MAX_ITER {
        let g = term.gradient(&u).axpy(inv, &(&u - x));
        residual = g.norm();
        if residual <= tol {
            return Ok(u);
        }
        u = u.axpy(-step, &g);
    }
    Err(Error::ProxFailed {
        solver: "smooth prox descent",
        iterations: PROX_DESCENT_MAX_ITER,
        residual,
    })
}

/// `F(x) = f₁(x) + f₂(x) + h(x)`.
pub struct CompositeObjective {
    pub f1: Box<dyn SmoothTerm>,
    pub f2: Box<dyn ProxableTerm>,
    pub h: Box<dyn SmoothTerm>,
}

impl fmt::Debug for CompositeObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeObjective")
            .field("f1", &self.f1.name())
            .field("f2", &self.f2.name())
            .field("h", &self.h.name())
            .finish()
    }
}

impl CompositeObjective {
    pub fn new(
        f1: impl SmoothTerm + 'static,
        f2: impl ProxableTerm + 'static,
        h: impl SmoothTerm + 'static,
    ) -> Self {
        CompositeObjective {
            f1: Box::new(f1),
            f2: Box::new(f2),
            h: Box::new(h),
        }
    }

    pub fn value(&self, x: &Tensor) -> Value {
        objective_value(self, x)
    }
}

pub fn objective_value(p: &CompositeObjective, x: &Tensor) -> Value {
    p.f2.value(x) + (p.f1.value(x) + p.h.value(x))
}

/// `‖∇f₁(z) + ∇h(z) + v‖` with `v = (2y − z − w)/γ − ∇h(y) ∈ ∂f₂(z)`, a bound
/// on `dist(0, ∂F(z))` at the last completed iterate.
pub fn criticality_residual(p: &CompositeObjective, state: &DysState, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let (y, z, w) = (&state.y, &state.z, &state.w);
    let v = y
        .scale(2.0)
        .zip_map(z, |a, b| a - b)
        .zip_map(w, |a, b| (a - b) / gamma)
        .axpy(-1.0, &p.h.gradient(y));
    let total = &(&p.f1.gradient(z) + &p.h.gradient(z)) + &v;
    Ok(total.norm())
}

/// The zero function, usable in any of the three slots.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl SmoothTerm for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn value(&self, _x: &Tensor) -> f64 {
        0.0
    }
    fn gradient(&self, x: &Tensor) -> Tensor {
        Tensor::zeros(x.shape())
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn lower_curvature(&self) -> f64 {
        0.0
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(0.0)
    }
    fn hessian_apply(&self, _x: &Tensor, v: &Tensor) -> Option<Tensor> {
        Some(Tensor::zeros(v.shape()))
    }
    fn prox(&self, _gamma: f64, x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }
}

impl ProxableTerm for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn value(&self, _x: &Tensor) -> Value {
        Value::Finite(0.0)
    }
    fn prox(&self, _gamma: f64, x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }
}

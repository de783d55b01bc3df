//! Gradient-step denoisers `D_σ = I − ∇g_σ` and the prior `φ_σ` they are the
//! proximal map of.
//!
//! When `∇g_σ` is `L`-Lipschitz with `L < 1`, `D_σ` is injective and
//!
//! ```text
//! φ_σ(x) = g_σ(D_σ⁻¹(x)) − ½‖D_σ⁻¹(x) − x‖²   on Im(D_σ),  +∞ elsewhere
//! ```
//!
//! satisfies `D_σ = Prox_{φ_σ}`, `φ_σ` is `L/(L+1)`-weakly convex and
//! `∇φ_σ(x) = D_σ⁻¹(x) − x` is `L/(1−L)`-Lipschitz.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::imaging::kernels;
use crate::imaging::rng::SplitMix64;
use crate::problem::{ProxableTerm, SmoothTerm, Value};
use crate::stepsize::pnp_nonsmooth_constants;
use crate::tensor::{CirculantOperator, Tensor};

/// The potential `g_σ` behind a gradient-step denoiser.
pub trait Potential: Send + Sync {
    fn value(&self, x: &Tensor) -> f64;

    fn gradient(&self, x: &Tensor) -> Tensor;

    /// Lipschitz constant of the gradient; must be below 1.
    fn lipschitz(&self) -> f64;

    /// Solves `u − ∇g(u) = x` in closed form, when possible.
    fn exact_inverse(&self, _x: &Tensor) -> Option<Tensor> {
        None
    }

    /// Eigenvalues of `∇²g` when the potential is a circulant quadratic.
    fn spectrum(&self) -> Option<&[f64]> {
        None
    }
}

/// `g(x) = (c/2)‖(I − G)x‖²` for a symmetric circulant smoother `G` with
/// spectrum in `[0, 1]`; `∇²g` has eigenvalues `c(1 − Ĝ)²`.
#[derive(Clone)]
pub struct LinearPotential {
    c: f64,
    smoother: CirculantOperator,
    eig: Arc<Vec<f64>>,
}

impl fmt::Debug for LinearPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearPotential")
            .field("c", &self.c)
            .field("grid", &self.smoother.grid())
            .finish()
    }
}

impl LinearPotential {
    fn filter(&self, x: &Tensor, mult: impl Fn(f64) -> f64) -> Tensor {
        self.smoother.fft().filter(x, |i| Complex64::new(mult(self.eig[i]), 0.0))
    }
}

impl Potential for LinearPotential {
    fn value(&self, x: &Tensor) -> f64 {
        let r = x - &self.smoother.apply(x).expect("linear denoiser: operand grid");
        0.5 * self.c * r.norm_sq()
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        self.filter(x, |e| e)
    }

    fn lipschitz(&self) -> f64 {
        self.eig.iter().cloned().fold(0.0, f64::max)
    }

    fn exact_inverse(&self, x: &Tensor) -> Option<Tensor> {
        Some(self.filter(x, |e| 1.0 / (1.0 - e)))
    }

    fn spectrum(&self) -> Option<&[f64]> {
        Some(&self.eig)
    }
}

const INVERSE_TOL: f64 = 1e-10;
const INVERSE_MAX_ITER: usize = 100_000;

/// `D_σ = I − ∇g_σ` with `∇g_σ` `L`-Lipschitz, `L < 1`.
#[derive(Clone)]
pub struct GradStepDenoiser {
    potential: Arc<dyn Potential>,
    sigma: f64,
}

impl fmt::Debug for GradStepDenoiser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GradStepDenoiser")
            .field("lipschitz", &self.lipschitz())
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl GradStepDenoiser {
    /// Wraps any potential; rejects `L ≥ 1`.
    pub fn new(potential: Arc<dyn Potential>, sigma: f64) -> Result<Self> {
        let l = potential.lipschitz();
        if !(l >= 0.0 && l < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "denoiser Lipschitz constant must lie in [0, 1), got {l}"
            )));
        }
        Ok(GradStepDenoiser { potential, sigma })
    }

    pub fn lipschitz(&self) -> f64 {
        self.potential.lipschitz()
    }

    /// Nominal noise level the denoiser was built for.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn g_value(&self, x: &Tensor) -> f64 {
        self.potential.value(x)
    }

    pub fn g_grad(&self, x: &Tensor) -> Tensor {
        self.potential.gradient(x)
    }

    /// `D_σ(x) = x − ∇g_σ(x)`
    pub fn apply(&self, x: &Tensor) -> Tensor {
        x - &self.potential.gradient(x)
    }

    /// Solves `D_σ(u) = x`: in closed form for linear potentials, otherwise by
    /// the contraction `u ← x + ∇g_σ(u)`.
    pub fn inverse(&self, x: &Tensor) -> Result<Tensor> {
        if let Some(u) = self.potential.exact_inverse(x) {
            return Ok(u);
        }
        let l = self.lipschitz();
        let tol = INVERSE_TOL * (1.0 - l) * x.norm().max(1.0);
        let mut u = x.clone();
        let mut step = f64::INFINITY;
        for _ in 0..INVERSE_MAX_ITER {
            let next = x + &self.potential.gradient(&u);
            step = next.distance(&u);
            u = next;
            if step <= tol {
                return Ok(u);
            }
        }
        Err(Error::ProxFailed {
            solver: "denoiser inverse",
            iterations: INVERSE_MAX_ITER,
            residual: step,
        })
    }
}

/// Circulant quadratic denoiser `D_σ = I − c(I − G)²`.
///
/// `G` must be symmetric with spectrum in `[0, 1]`; then `L = c·max(1 − Ĝ)² ≤ c`.
pub fn linear_denoiser(c: f64, g: &CirculantOperator, sigma: f64) -> Result<GradStepDenoiser> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("denoiser strength c must lie in (0, 1), got {c}")));
    }
    let mut eig = Vec::with_capacity(g.spectrum().len());
    for z in g.spectrum() {
        if z.im.abs() > 1e-10 || z.re < -1e-10 || z.re > 1.0 + 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "smoother spectrum must be real and within [0, 1], found {z}"
            )));
        }
        let m = 1.0 - z.re.clamp(0.0, 1.0);
        eig.push(c * m * m);
    }
    let potential = LinearPotential {
        c,
        smoother: g.clone(),
        eig: Arc::new(eig),
    };
    GradStepDenoiser::new(Arc::new(potential), sigma)
}

/// Symmetric Gaussian smoother `G = KᵀK` on an `h x w` grid, with `K` a
/// normalized Gaussian of standard deviation `width` pixels. Its spectrum
/// `|K̂|²` lies in `[0, 1]`.
pub fn gaussian_smoother(h: usize, w: usize, width: f64) -> Result<CirculantOperator> {
    let k = kernels::gaussian(width, h, w)?;
    let op = CirculantOperator::from_kernel(&k, h, w)?;
    let spec: Vec<f64> = op.spectrum().iter().map(|z| z.norm_sqr()).collect();
    CirculantOperator::from_real_spectrum(h, w, spec)
}

/// The prior `φ_σ` induced by a gradient-step denoiser.
#[derive(Clone, Debug)]
pub struct PhiSigma {
    denoiser: GradStepDenoiser,
}

impl PhiSigma {
    pub fn new(denoiser: GradStepDenoiser) -> Self {
        PhiSigma { denoiser }
    }

    pub fn denoiser(&self) -> &GradStepDenoiser {
        &self.denoiser
    }

    pub fn eval(&self, x: &Tensor) -> Value {
        phi_sigma_eval(self, x)
    }

    /// `∇φ_σ(x) = D_σ⁻¹(x) − x`
    pub fn gradient(&self, x: &Tensor) -> Result<Tensor> {
        Ok(&self.denoiser.inverse(x)? - x)
    }

    /// Lipschitz constant of `∇φ_σ`: exact for linear denoisers, the bound
    /// `L/(1−L)` otherwise.
    pub fn gradient_lipschitz(&self) -> f64 {
        match self.denoiser.potential().spectrum() {
            Some(eig) => eig.iter().map(|e| e / (1.0 - e)).fold(0.0, f64::max),
            None => {
                let l = self.denoiser.lipschitz();
                l / (1.0 - l)
            }
        }
    }

    /// Weak-convexity modulus `L/(L+1)` guaranteed for `φ_σ`.
    pub fn weak_convexity(&self) -> f64 {
        let l = self.denoiser.lipschitz();
        l / (l + 1.0)
    }
}

/// `φ_σ(x) = g_σ(D_σ⁻¹(x)) − ½‖D_σ⁻¹(x) − x‖²`, or `+∞` when `x` cannot be
/// certified to lie in the image of the denoiser (the inverse fails).
pub fn phi_sigma_eval(phi: &PhiSigma, x: &Tensor) -> Value {
    match phi.denoiser.inverse(x) {
        Ok(u) => Value::Finite(phi.denoiser.g_value(&u) - 0.5 * u.distance(x).powi(2)),
        Err(e) => {
            log::warn!("phi_sigma: {e}; treating the point as outside the denoiser image");
            Value::Infinite
        }
    }
}

/// Checks that `φ_σ + (ρ/2)‖·‖²` is convex: spectrally for circulant linear
/// denoisers, otherwise by the secant inequality on 100 random pairs of the
/// given shape.
pub fn weak_convexity_certificate(phi: &PhiSigma, rho: f64, shape: &[usize]) -> bool {
    match phi.denoiser.potential().spectrum() {
        // Hessian of φ_σ has eigenvalues e/(1 − e)
        Some(eig) => eig.iter().all(|e| e / (1.0 - e) + rho >= -1e-12),
        None => secant_violations(phi, rho, shape, 100, 0) == 0,
    }
}

/// Counts pairs `(a, b)` and weights `θ` violating
/// `φ(θa + (1−θ)b) ≤ θφ(a) + (1−θ)φ(b) + (ρ/2)θ(1−θ)‖a − b‖²` beyond `1e-10`.
pub fn secant_violations(phi: &PhiSigma, rho: f64, shape: &[usize], pairs: usize, seed: u64) -> usize {
    let mut rng = SplitMix64::new(seed);
    let n: usize = shape.iter().product();
    let draw = |rng: &mut SplitMix64| Tensor::from_parts(shape.to_vec(), (0..n).map(|_| rng.next_f64() * 2.0 - 1.0).collect());
    let mut bad = 0;
    for _ in 0..pairs {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let th = rng.next_f64();
        let mid = a.scale(th).axpy(1.0 - th, &b);
        let (fa, fb, fm) = (phi.eval(&a), phi.eval(&b), phi.eval(&mid));
        let (Value::Finite(fa), Value::Finite(fb), Value::Finite(fm)) = (fa, fb, fm) else {
            continue;
        };
        let rhs = th * fa + (1.0 - th) * fb + 0.5 * rho * th * (1.0 - th) * a.distance(&b).powi(2);
        if fm > rhs + 1e-10 * (1.0 + rhs.abs()) {
            bad += 1;
        }
    }
    bad
}

/// Which slot of the splitting the denoiser occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DenoiserSlot {
    /// `y = D_σ(w)`: the prior is `f₁ = φ_σ/γ`.
    First,
    /// `z = D_σ(·)`: the prior is `f₂ = φ_σ/γ`.
    Second,
}

/// `φ_σ/γ` for a fixed `γ`, whose prox at step `γ` is exactly `D_σ`.
#[derive(Clone, Debug)]
pub struct DenoiserPrior {
    phi: PhiSigma,
    gamma: f64,
    slot: DenoiserSlot,
    lip: f64,
    lower: f64,
}

impl DenoiserPrior {
    pub fn new(denoiser: GradStepDenoiser, gamma: f64, slot: DenoiserSlot) -> Result<Self> {
        let (lip, lower) = pnp_nonsmooth_constants(denoiser.lipschitz(), gamma)?;
        Ok(DenoiserPrior {
            phi: PhiSigma::new(denoiser),
            gamma,
            slot,
            lip,
            lower,
        })
    }

    pub fn slot(&self) -> DenoiserSlot {
        self.slot
    }

    fn denoise(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        if (gamma - self.gamma).abs() > 1e-12 * self.gamma {
            return Err(Error::ProxUnavailable(format!(
                "denoiser prior is built for gamma={}, asked for {gamma}",
                self.gamma
            )));
        }
        Ok(self.phi.denoiser.apply(x))
    }
}

impl ProxableTerm for DenoiserPrior {
    fn name(&self) -> &str {
        "denoiser prior"
    }

    fn value(&self, x: &Tensor) -> Value {
        match self.phi.eval(x) {
            Value::Finite(v) => Value::Finite(v / self.gamma),
            Value::Infinite => Value::Infinite,
        }
    }

    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        self.denoise(gamma, x)
    }
}

impl SmoothTerm for DenoiserPrior {
    fn name(&self) -> &str {
        "denoiser prior"
    }

    fn value(&self, x: &Tensor) -> f64 {
        self.phi.eval(x).finite().unwrap_or(f64::INFINITY) / self.gamma
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        match self.phi.gradient(x) {
            Ok(g) => g.scale(1.0 / self.gamma),
            Err(e) => {
                log::error!("phi_sigma gradient: {e}");
                Tensor::full(x.shape(), f64::NAN)
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }

    fn lower_curvature(&self) -> f64 {
        self.lower
    }

    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        self.denoise(gamma, x)
    }
}

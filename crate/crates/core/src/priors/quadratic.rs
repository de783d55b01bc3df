use crate::error::{Error, Result};
use crate::imaging::Downsampler;
use crate::problem::SmoothTerm;
use crate::tensor::{CirculantOperator, Tensor};

/// `Σᵢ (dᵢ/2)(xᵢ − tᵢ)²`, possibly with negative `dᵢ` (nonconvex).
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalQuadratic {
    d: Vec<f64>,
    t: Vec<f64>,
}

impl DiagonalQuadratic {
    pub fn new(d: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        if d.len() != t.len() || d.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: vec![d.len()],
                found: vec![t.len()],
            });
        }
        if d.iter().chain(&t).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("diagonal quadratic coefficients".into()));
        }
        Ok(DiagonalQuadratic { d, t })
    }

    /// `(d/2)‖x‖²` on tensors of the given shape.
    pub fn isotropic(d: f64, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        DiagonalQuadratic {
            d: vec![d; n],
            t: vec![0.0; n],
        }
    }

    fn check(&self, x: &Tensor) {
        assert_eq!(x.len(), self.d.len(), "diagonal quadratic: length mismatch");
    }
}

impl SmoothTerm for DiagonalQuadratic {
    fn name(&self) -> &str {
        "diagonal quadratic"
    }

    fn value(&self, x: &Tensor) -> f64 {
        self.check(x);
        x.data()
            .iter()
            .zip(self.d.iter().zip(&self.t))
            .map(|(v, (d, t))| 0.5 * d * (v - t) * (v - t))
            .sum()
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        self.check(x);
        let data = x.data().iter().zip(self.d.iter().zip(&self.t)).map(|(v, (d, t))| d * (v - t)).collect();
        Tensor::from_parts(x.shape().to_vec(), data)
    }

    fn lipschitz(&self) -> f64 {
        self.d.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    fn lower_curvature(&self) -> f64 {
        -self.d.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn hessian_bound(&self) -> Option<f64> {
        Some(self.lipschitz())
    }

    fn hessian_apply(&self, _x: &Tensor, v: &Tensor) -> Option<Tensor> {
        self.check(v);
        let data = v.data().iter().zip(&self.d).map(|(a, d)| a * d).collect();
        Some(Tensor::from_parts(v.shape().to_vec(), data))
    }

    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        self.check(x);
        let mut out = Vec::with_capacity(x.len());
        for (v, (d, t)) in x.data().iter().zip(self.d.iter().zip(&self.t)) {
            let den = 1.0 + gamma * d;
            if den <= 0.0 {
                return Err(Error::ProxUnavailable(format!(
                    "diagonal quadratic with curvature {d} has no prox at gamma={gamma}"
                )));
            }
            out.push((v + gamma * d * t) / den);
        }
        Ok(Tensor::from_parts(x.shape().to_vec(), out))
    }
}

/// Tikhonov regularizer `(β/2)‖x‖²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tikhonov {
    beta: f64,
}

impl Tikhonov {
    pub fn new(beta: f64) -> Self {
        assert!(beta >= 0.0 && beta.is_finite(), "beta must be nonnegative");
        Tikhonov { beta }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl SmoothTerm for Tikhonov {
    fn name(&self) -> &str {
        "tikhonov"
    }
    fn value(&self, x: &Tensor) -> f64 {
        0.5 * self.beta * x.norm_sq()
    }
    fn gradient(&self, x: &Tensor) -> Tensor {
        x.scale(self.beta)
    }
    fn lipschitz(&self) -> f64 {
        self.beta
    }
    fn lower_curvature(&self) -> f64 {
        -self.beta
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(self.beta)
    }
    fn hessian_apply(&self, _x: &Tensor, v: &Tensor) -> Option<Tensor> {
        Some(v.scale(self.beta))
    }
    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        Ok(x.scale(1.0 / (1.0 + gamma * self.beta)))
    }
}

/// `w Σᵢ log cosh(xᵢ − tᵢ)`: convex, smooth, with bounded Hessian `w sech²`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogCosh {
    weight: f64,
    t: Vec<f64>,
}

fn log_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl LogCosh {
    pub fn new(weight: f64, t: Vec<f64>) -> Result<Self> {
        if !(weight >= 0.0) || t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("log-cosh needs weight >= 0 and finite offsets".into()));
        }
        Ok(LogCosh { weight, t })
    }

    fn check(&self, x: &Tensor) {
        assert_eq!(x.len(), self.t.len(), "log-cosh: length mismatch");
    }
}

impl SmoothTerm for LogCosh {
    fn name(&self) -> &str {
        "log-cosh"
    }
    fn value(&self, x: &Tensor) -> f64 {
        self.check(x);
        self.weight * x.data().iter().zip(&self.t).map(|(v, t)| log_cosh(v - t)).sum::<f64>()
    }
    fn gradient(&self, x: &Tensor) -> Tensor {
        self.check(x);
        let data = x.data().iter().zip(&self.t).map(|(v, t)| self.weight * (v - t).tanh()).collect();
        Tensor::from_parts(x.shape().to_vec(), data)
    }
    fn lipschitz(&self) -> f64 {
        self.weight
    }
    fn lower_curvature(&self) -> f64 {
        0.0
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(self.weight)
    }
    fn hessian_apply(&self, x: &Tensor, v: &Tensor) -> Option<Tensor> {
        self.check(x);
        let data = x
            .data()
            .iter()
            .zip(&self.t)
            .zip(v.data())
            .map(|((a, t), b)| {
                let s = 1.0 / (a - t).cosh();
                self.weight * s * s * b
            })
            .collect();
        Some(Tensor::from_parts(v.shape().to_vec(), data))
    }
}

/// The forward operator of a least-squares term.
#[derive(Clone, Debug)]
pub enum LinearOperator {
    /// `A = B`, a periodic blur.
    Blur(CirculantOperator),
    /// `A = S B`: blur followed by `s`-fold downsampling.
    Subsampled { blur: CirculantOperator, down: Downsampler },
}

impl LinearOperator {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            LinearOperator::Blur(b) => b.apply(x),
            LinearOperator::Subsampled { blur, down } => down.apply(&blur.apply(x)?),
        }
    }

    /// `Aᵀ r`; `r` lives in the observation space.
    pub fn adjoint(&self, r: &Tensor) -> Result<Tensor> {
        match self {
            LinearOperator::Blur(b) => b.adjoint(r),
            LinearOperator::Subsampled { blur, down } => {
                let (h, w) = blur.grid();
                blur.adjoint(&down.adjoint(r, h, w)?)
            }
        }
    }

    pub fn normal(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            LinearOperator::Blur(b) => b.normal(x),
            _ => self.adjoint(&self.apply(x)?),
        }
    }

    /// `λ_max(AᵀA)`. For `A = SB` this is the largest eigenvalue of the
    /// circulant `S B Bᵀ Sᵀ` on the coarse grid: the maximum over aliasing
    /// classes of `(1/s²) Σ |B̂|²`.
    pub fn max_normal_eigenvalue(&self) -> f64 {
        match self {
            LinearOperator::Blur(b) => b.max_normal_eigenvalue(),
            LinearOperator::Subsampled { blur, down } => {
                let s = down.factor();
                let (h, w) = blur.grid();
                let (hl, wl) = (h / s, w / s);
                let spec = blur.spectrum();
                let mut best: f64 = 0.0;
                for p in 0..hl {
                    for q in 0..wl {
                        let mut acc = 0.0;
                        for i in 0..s {
                            for j in 0..s {
                                acc += spec[(p + i * hl) * w + q + j * wl].norm_sqr();
                            }
                        }
                        best = best.max(acc / (s * s) as f64);
                    }
                }
                best
            }
        }
    }

    /// `λ_min(AᵀA)`; zero whenever downsampling drops pixels.
    pub fn min_normal_eigenvalue(&self) -> f64 {
        match self {
            LinearOperator::Blur(b) => b.min_normal_eigenvalue(),
            LinearOperator::Subsampled { blur, down } => {
                if down.factor() == 1 {
                    blur.min_normal_eigenvalue()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        match self {
            LinearOperator::Blur(b) => b.grid(),
            LinearOperator::Subsampled { blur, .. } => blur.grid(),
        }
    }
}

const CG_MAX_ITER: usize = 500;

/// Data fidelity `‖Ax − b‖²/(2ν²)`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    op: LinearOperator,
    b: Tensor,
    nu: f64,
    lip: f64,
    lower: f64,
}

impl LeastSquares {
    pub fn new(op: LinearOperator, b: Tensor, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("noise level must be positive, got {nu}")));
        }
        let (h, w) = op.grid();
        if let LinearOperator::Subsampled { down, .. } = &op {
            if h % down.factor() != 0 || w % down.factor() != 0 {
                return Err(Error::InvalidShape {
                    shape: vec![h, w],
                    reason: format!("grid not divisible by scale {}", down.factor()),
                });
            }
        }
        let nu2 = nu * nu;
        let lip = op.max_normal_eigenvalue() / nu2;
        let lower = -op.min_normal_eigenvalue() / nu2;
        Ok(LeastSquares { op, b, nu, lip, lower })
    }

    pub fn blur(op: CirculantOperator, b: Tensor, nu: f64) -> Result<Self> {
        op.apply(&b)?;
        Self::new(LinearOperator::Blur(op), b, nu)
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn observation(&self) -> &Tensor {
        &self.b
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn residual(&self, x: &Tensor) -> Tensor {
        let ax = self.op.apply(x).expect("least squares: operand shape");
        &ax - &self.b
    }

    fn cg(&self, gamma: f64, v: &Tensor) -> Result<Tensor> {
        // (AᵀA/ν² + I/γ) u = Aᵀb/ν² + v/γ
        let nu2 = self.nu * self.nu;
        let apply = |u: &Tensor| -> Result<Tensor> { Ok(self.op.normal(u)?.scale(1.0 / nu2).axpy(1.0 / gamma, u)) };
        let rhs = self.op.adjoint(&self.b)?.scale(1.0 / nu2).axpy(1.0 / gamma, v);
        let tol = 1e-12 * rhs.norm();
        let mut u = v.clone();
        let mut r = &rhs - &apply(&u)?;
        let mut p = r.clone();
        let mut rr = r.norm_sq();
        for _ in 0..CG_MAX_ITER {
            if rr.sqrt() <= tol {
                return Ok(u);
            }
            let ap = apply(&p)?;
            let step = rr / p.dot(&ap)?;
            u = u.axpy(step, &p);
            r = r.axpy(-step, &ap);
            let rr_new = r.norm_sq();
            p = r.axpy(rr_new / rr, &p);
            rr = rr_new;
        }
        if rr.sqrt() <= 1e-9 * rhs.norm() {
            return Ok(u);
        }
        Err(Error::ProxFailed {
            solver: "conjugate gradient",
            iterations: CG_MAX_ITER,
            residual: rr.sqrt(),
        })
    }
}

impl SmoothTerm for LeastSquares {
    fn name(&self) -> &str {
        "least squares"
    }

    fn value(&self, x: &Tensor) -> f64 {
        self.residual(x).norm_sq() / (2.0 * self.nu * self.nu)
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        self.op
            .adjoint(&self.residual(x))
            .expect("least squares: operand shape")
            .scale(1.0 / (self.nu * self.nu))
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }

    fn lower_curvature(&self) -> f64 {
        self.lower
    }

    fn hessian_bound(&self) -> Option<f64> {
        Some(self.lip)
    }

    fn hessian_apply(&self, _x: &Tensor, v: &Tensor) -> Option<Tensor> {
        self.op.normal(v).ok().map(|t| t.scale(1.0 / (self.nu * self.nu)))
    }

    fn prox(&self, gamma: f64, v: &Tensor) -> Result<Tensor> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        match &self.op {
            LinearOperator::Blur(b) => {
                // (AᵀA + (ν²/γ) I) u = Aᵀb + (ν²/γ) v
                let a = self.nu * self.nu / gamma;
                let rhs = b.adjoint(&self.b)?.axpy(a, v);
                b.solve_shifted(a, &rhs)
            }
            LinearOperator::Subsampled { .. } => self.cg(gamma, v),
        }
    }
}

/// `argmin_u ‖Au − b‖²/(2ν²) + ‖u − v‖²/(2γ)`.
pub fn ls_prox(t: &LeastSquares, gamma: f64, v: &Tensor) -> Result<Tensor> {
    t.prox(gamma, v)
}

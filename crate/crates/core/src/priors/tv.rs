//! Isotropic total variation with periodic forward differences.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::problem::{ProxableTerm, SmoothTerm, Value};
use crate::tensor::{Fft2, Tensor};

/// Periodic forward differences of one `h x w` plane: `(Dₓu, D_yu)`.
fn forward_diff(u: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut dx = vec![0.0; h * w];
    let mut dy = vec![0.0; h * w];
    for i in 0..h {
        let down = ((i + 1) % h) * w;
        for j in 0..w {
            let at = i * w + j;
            dx[at] = u[i * w + (j + 1) % w] - u[at];
            dy[at] = u[down + j] - u[at];
        }
    }
    (dx, dy)
}

/// `Dₓᵀpx + D_yᵀpy`
fn diff_adjoint(px: &[f64], py: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for i in 0..h {
        let up = ((i + h - 1) % h) * w;
        for j in 0..w {
            let at = i * w + j;
            out[at] = px[i * w + (j + w - 1) % w] - px[at] + py[up + j] - py[at];
        }
    }
    out
}

fn planes(x: &Tensor) -> (usize, usize, usize) {
    x.spatial()
}

/// `Σ_pixels √((Dₓu)² + (D_yu)²)`, summed over channels.
pub fn total_variation(x: &Tensor) -> f64 {
    let (h, w, c) = planes(x);
    (0..c)
        .map(|ch| {
            let (dx, dy) = forward_diff(&x.channel(ch), h, w);
            dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).sum::<f64>()
        })
        .sum()
}

/// Split Bregman for `min_u weight·Σ ψ(|∇u|) + ‖u − v‖²/(2γ)` where `ψ(t) = t`
/// (`huber = 0`) or the Huber function with threshold `huber`.
fn split_bregman(v: &Tensor, gamma: f64, weight: f64, huber: f64, max_inner: usize, tol: f64) -> Tensor {
    let (h, w, _) = planes(v);
    let fft = Fft2::new(h, w);
    let mu = 2.0 / gamma;
    let inv_gamma = 1.0 / gamma;
    let denom: Vec<f64> = (0..h * w)
        .map(|k| {
            let (i, j) = (k / w, k % w);
            let lap = (2.0 - 2.0 * (2.0 * PI * j as f64 / w as f64).cos())
                + (2.0 - 2.0 * (2.0 * PI * i as f64 / h as f64).cos());
            inv_gamma + mu * lap
        })
        .collect();
    let t = weight / mu;
    v.map_channels(|f| {
        let n = h * w;
        let mut u = f.to_vec();
        // warm start at d = ∇v, so the first u-step returns v itself
        let (mut dx, mut dy) = forward_diff(&u, h, w);
        let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..max_inner {
            // u-step: (I/γ + μ DᵀD) u = f/γ + μ Dᵀ(d − b)
            let qx: Vec<f64> = dx.iter().zip(&bx).map(|(d, b)| d - b).collect();
            let qy: Vec<f64> = dy.iter().zip(&by).map(|(d, b)| d - b).collect();
            let adj = diff_adjoint(&qx, &qy, h, w);
            let rhs: Vec<f64> = f.iter().zip(&adj).map(|(a, b)| a * inv_gamma + mu * b).collect();
            let mut buf: Vec<Complex64> = rhs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            fft.forward(&mut buf);
            for (z, d) in buf.iter_mut().zip(&denom) {
                *z /= *d;
            }
            fft.inverse(&mut buf);
            let next: Vec<f64> = buf.iter().map(|z| z.re).collect();
            let change = next.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let scale = next.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
            u = next;

            // d-step: shrink ∇u + b, b-step: b += ∇u − d
            let (gx, gy) = forward_diff(&u, h, w);
            let mut residual = 0.0;
            for k in 0..n {
                let (sx, sy) = (gx[k] + bx[k], gy[k] + by[k]);
                let mag = sx.hypot(sy);
                let factor = if huber > 0.0 && mag <= huber + t {
                    huber / (huber + t)
                } else if mag > t {
                    1.0 - t / mag
                } else {
                    0.0
                };
                dx[k] = sx * factor;
                dy[k] = sy * factor;
                bx[k] = sx - dx[k];
                by[k] = sy - dy[k];
                residual += (gx[k] - dx[k]).powi(2) + (gy[k] - dy[k]).powi(2);
            }
            if change <= tol * scale && residual.sqrt() <= tol * scale {
                break;
            }
        }
        u
    })
}

/// Default inner iteration cap, matching common library defaults.
pub const TV_MAX_INNER: usize = 100;

/// Approximately minimizes `weight·TV(u) + ‖u − v‖²/(2γ)` by split Bregman,
/// with at most `max_inner` iterations per channel.
pub fn tv_prox(gamma: f64, weight: f64, v: &Tensor, max_inner: usize) -> Tensor {
    if !(weight > 0.0) || !(gamma > 0.0) {
        return v.clone();
    }
    split_bregman(v, gamma, weight, 0.0, max_inner, 1e-12)
}

/// `weight · TV(x)`; the prox is computed inexactly by [`tv_prox`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TotalVariation {
    weight: f64,
    max_inner: usize,
    tol: f64,
}

impl TotalVariation {
    pub fn new(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::InvalidParameter(format!("TV weight must be nonnegative, got {weight}")));
        }
        Ok(TotalVariation { weight, max_inner: TV_MAX_INNER, tol: 1e-12 })
    }

    /// Inner iteration cap and relative-change tolerance of the split Bregman solver.
    pub fn with_inner(mut self, max_inner: usize, tol: f64) -> Self {
        self.max_inner = max_inner.max(1);
        self.tol = tol;
        self
    }

    pub fn max_inner(&self) -> usize {
        self.max_inner
    }
}

impl ProxableTerm for TotalVariation {
    fn name(&self) -> &str {
        "total variation"
    }

    fn value(&self, x: &Tensor) -> Value {
        Value::Finite(self.weight * total_variation(x))
    }

    fn prox(&self, gamma: f64, x: &Tensor) -> Result<Tensor> {
        if self.weight == 0.0 {
            return Ok(x.clone());
        }
        Ok(split_bregman(x, gamma, self.weight, 0.0, self.max_inner, self.tol))
    }
}

/// Huber-smoothed TV `weight·Σ hub_ε(|∇u|)` with `hub_ε(t) = t²/(2ε)` for
/// `t ≤ ε` and `t − ε/2` beyond. Convex, with gradient Lipschitz constant
/// `8·weight/ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HuberTv {
    weight: f64,
    eps: f64,
}

impl HuberTv {
    pub fn new(weight: f64, eps: f64) -> Self {
        assert!(weight >= 0.0 && eps > 0.0, "Huber-TV needs weight >= 0 and eps > 0");
        HuberTv { weight, eps }
    }
}

impl SmoothTerm for HuberTv {
    fn name(&self) -> &str {
        "huber tv"
    }

    fn value(&self, x: &Tensor) -> f64 {
        let (h, w, c) = planes(x);
        let eps = self.eps;
        let total: f64 = (0..c)
            .map(|ch| {
                let (dx, dy) = forward_diff(&x.channel(ch), h, w);
                dx.iter()
                    .zip(&dy)
                    .map(|(a, b)| {
                        let t = a.hypot(*b);
                        if t <= eps {
                            t * t / (2.0 * eps)
                        } else {
                            t - eps / 2.0
                        }
                    })
                    .sum::<f64>()
            })
            .sum();
        self.weight * total
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        let (h, w, _) = planes(x);
        x.map_channels(|u| {
            let (mut dx, mut dy) = forward_diff(u, h, w);
            for (a, b) in dx.iter_mut().zip(dy.iter_mut()) {
                let s = self.weight / a.hypot(*b).max(self.eps);
                *a *= s;
                *b *= s;
            }
            diff_adjoint(&dx, &dy, h, w)
        })
    }

    fn lipschitz(&self) -> f64 {
        8.0 * self.weight / self.eps
    }

    fn lower_curvature(&self) -> f64 {
        0.0
    }
}

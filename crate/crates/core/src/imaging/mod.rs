//! Degradation synthesis and image quality.
//!
//! Observations follow `b = A x + ξ` with `A = B` (deblurring) or `A = S B`
//! (super-resolution), `B` a periodic blur, `S` the `s`-fold downsampler that
//! keeps the upper-left pixel of every `s x s` patch, and `ξ` i.i.d. Gaussian
//! noise drawn from [`rng::SplitMix64`] in row-major order.

pub mod io;
pub mod kernels;
pub mod metrics;
pub mod rng;
pub mod synthetic;

pub use io::{load_image, save_image, BitDepth};
pub use metrics::{mse, psnr, ssim, PSNR_CAP};

use crate::error::{Error, Result};
use crate::tensor::{CirculantOperator, Tensor};

/// `s`-fold decimation keeping pixel `(s·i, s·j)`; its adjoint zero-fills.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Downsampler {
    s: usize,
}

fn with_grid(shape: &[usize], h: usize, w: usize) -> Vec<usize> {
    match shape {
        [_] if h == 1 => vec![w],
        [_] | [_, _] => vec![h, w],
        [_, _, rest @ ..] => [&[h, w][..], rest].concat(),
        [] => vec![],
    }
}

impl Downsampler {
    pub fn new(s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidParameter("scale factor must be at least 1".into()));
        }
        Ok(Downsampler { s })
    }

    pub fn factor(&self) -> usize {
        self.s
    }

    fn check(&self, h: usize, w: usize, shape: &[usize]) -> Result<()> {
        if h % self.s != 0 || w % self.s != 0 {
            return Err(Error::InvalidShape {
                shape: shape.to_vec(),
                reason: format!("dimensions not divisible by scale {}", self.s),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w, c) = x.spatial();
        self.check(h, w, x.shape())?;
        let s = self.s;
        let (hl, wl) = (h / s, w / s);
        let mut out = Vec::with_capacity(hl * wl * c);
        for i in 0..hl {
            for j in 0..wl {
                let at = ((i * s) * w + j * s) * c;
                out.extend_from_slice(&x.data()[at..at + c]);
            }
        }
        Ok(Tensor::from_parts(with_grid(x.shape(), hl, wl), out))
    }

    /// `Sᵀ y` onto an `h x w` grid.
    pub fn adjoint(&self, y: &Tensor, h: usize, w: usize) -> Result<Tensor> {
        self.check(h, w, &[h, w])?;
        let (hl, wl, c) = y.spatial();
        if (hl * self.s, wl * self.s) != (h, w) {
            return Err(Error::ShapeMismatch {
                expected: vec![h / self.s, w / self.s],
                found: y.shape().to_vec(),
            });
        }
        let s = self.s;
        let mut out = vec![0.0; h * w * c];
        for i in 0..hl {
            for j in 0..wl {
                let from = (i * wl + j) * c;
                let to = ((i * s) * w + j * s) * c;
                out[to..to + c].copy_from_slice(&y.data()[from..from + c]);
            }
        }
        Ok(Tensor::from_parts(with_grid(y.shape(), h, w), out))
    }
}

/// Nearest-neighbor enlargement by `s` in both directions.
pub fn upsample_nearest(y: &Tensor, s: usize) -> Result<Tensor> {
    if s == 0 {
        return Err(Error::InvalidParameter("scale factor must be at least 1".into()));
    }
    let (hl, wl, c) = y.spatial();
    let (h, w) = (hl * s, wl * s);
    let mut out = Vec::with_capacity(h * w * c);
    for i in 0..h {
        for j in 0..w {
            let at = ((i / s) * wl + j / s) * c;
            out.extend_from_slice(&y.data()[at..at + c]);
        }
    }
    Ok(Tensor::from_parts(with_grid(y.shape(), h, w), out))
}

#[derive(Clone, Debug)]
pub struct DegradationModel {
    pub blur: CirculantOperator,
    pub down: Option<Downsampler>,
    /// Noise standard deviation on the `[0, 1]` intensity scale.
    pub nu: f64,
    pub seed: u64,
}

/// `b = A x + ξ`, deterministic for a given seed.
pub fn degrade(m: &DegradationModel, x: &Tensor) -> Result<Tensor> {
    if !(m.nu >= 0.0) || !m.nu.is_finite() {
        return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {}", m.nu)));
    }
    let mut b = m.blur.apply(x)?;
    if let Some(d) = &m.down {
        b = d.apply(&b)?;
    }
    if m.nu > 0.0 {
        let mut g = rng::SplitMix64::new(m.seed);
        for v in b.data_mut() {
            *v += m.nu * g.gaussian();
        }
    }
    Ok(b)
}

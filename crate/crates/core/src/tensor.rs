//! Dense real arrays and FFT-backed circulant operators.
//!
//! A [`Tensor`] is a row-major `f64` buffer with an explicit shape. Images are
//! stored as `[H, W]` or `[H, W, C]` (channels interleaved); one-dimensional
//! signals `[n]` are treated as a single `1 x n` row wherever a spatial grid
//! is needed.
//!
//! A [`CirculantOperator`] models periodic-boundary convolution. Its kernel is
//! anchored so that the kernel center sits at index `(0, 0)` with wrap-around,
//! which makes a centered delta the exact identity.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking the length against the shape and rejecting
    /// non-finite entries.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape {
                shape,
                reason: "dimensions must be positive".into(),
            });
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::InvalidShape {
                shape,
                reason: format!("data has {} entries", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![data.len()], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Unchecked constructor for internal arithmetic where the shape is known
    /// to be consistent.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(height, width, channels)` of the spatial grid this tensor lives on.
    pub fn spatial(&self) -> (usize, usize, usize) {
        spatial_dims(&self.shape)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Tensor> {
        Tensor::new(shape, self.data)
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two equally shaped tensors.
    ///
    /// Panics on shape mismatch; use [`Tensor::check_same_shape`] first when
    /// shapes come from user input.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape, other.shape, "shape mismatch in elementwise op");
        Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| s * v)
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn distance(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch in distance");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn clip(&self, lo: f64, hi: f64) -> Tensor {
        self.map(|v| v.clamp(lo, hi))
    }

    /// Copies channel `c` out of an interleaved `[H, W, C]` buffer.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        let (_, _, nc) = self.spatial();
        self.data.iter().skip(c).step_by(nc).copied().collect()
    }

    pub(crate) fn set_channel(&mut self, c: usize, values: &[f64]) {
        let (_, _, nc) = self.spatial();
        for (dst, &v) in self.data.iter_mut().skip(c).step_by(nc).zip(values) {
            *dst = v;
        }
    }

    pub(crate) fn map_channels(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Tensor {
        let (_, _, nc) = self.spatial();
        if nc == 1 {
            return Tensor::from_parts(self.shape.clone(), f(&self.data));
        }
        let mut out = Tensor::zeros(&self.shape);
        for c in 0..nc {
            let plane = f(&self.channel(c));
            out.set_channel(c, &plane);
        }
        out
    }
}

/// Spatial interpretation of a shape: `[n] -> (1, n, 1)`, `[h, w] -> (h, w, 1)`,
/// `[h, w, c, ...] -> (h, w, c * ...)`.
pub fn spatial_dims(shape: &[usize]) -> (usize, usize, usize) {
    match shape {
        [] => (0, 0, 0),
        [n] => (1, *n, 1),
        [h, w] => (*h, *w, 1),
        [h, w, rest @ ..] => (*h, *w, rest.iter().product()),
    }
}

impl Add for &Tensor {
    type Output = Tensor;
    fn add(self, rhs: &Tensor) -> Tensor {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Tensor {
    type Output = Tensor;
    fn sub(self, rhs: &Tensor) -> Tensor {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&Tensor> for f64 {
    type Output = Tensor;
    fn mul(self, rhs: &Tensor) -> Tensor {
        rhs.scale(self)
    }
}

impl Neg for &Tensor {
    type Output = Tensor;
    fn neg(self) -> Tensor {
        self.scale(-1.0)
    }
}

/// Inner product `Σ aᵢbᵢ`.
pub fn dot(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.dot(b)
}

/// Planned 2-D DFT on an `h x w` grid.
#[derive(Clone)]
pub struct Fft2 {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2({}x{})", self.h, self.w)
    }
}

impl Fft2 {
    pub fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    fn transform(&self, buf: &mut [Complex64], rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        let (h, w) = (self.h, self.w);
        debug_assert_eq!(buf.len(), h * w);
        if w > 1 {
            rows.process(buf);
        }
        if h > 1 {
            let mut col = vec![Complex64::new(0.0, 0.0); h];
            for j in 0..w {
                for i in 0..h {
                    col[i] = buf[i * w + j];
                }
                cols.process(&mut col);
                for i in 0..h {
                    buf[i * w + j] = col[i];
                }
            }
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.transform(buf, self.row_fwd.as_ref(), self.col_fwd.as_ref());
    }

    /// Inverse DFT including the `1/(hw)` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, self.row_inv.as_ref(), self.col_inv.as_ref());
        let s = 1.0 / (self.h * self.w) as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    pub fn forward_real(&self, plane: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Multiplies each frequency of every channel of `x` by `mult(index)` and
    /// returns the real part of the inverse transform.
    pub fn filter(&self, x: &Tensor, mult: impl Fn(usize) -> Complex64) -> Tensor {
        x.map_channels(|plane| {
            let mut buf = self.forward_real(plane);
            for (i, v) in buf.iter_mut().enumerate() {
                *v *= mult(i);
            }
            self.inverse(&mut buf);
            buf.iter().map(|c| c.re).collect()
        })
    }
}

/// Periodic-boundary convolution operator with a cached spectrum.
#[derive(Clone)]
pub struct CirculantOperator {
    kernel: Tensor,
    spectrum: Arc<Vec<Complex64>>,
    fft: Fft2,
    // exact delta kernel: skip the FFT round trip so the identity is bit-exact
    identity: bool,
}

impl fmt::Debug for CirculantOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantOperator")
            .field("shape", &self.kernel.shape())
            .finish()
    }
}

impl CirculantOperator {
    /// Builds the operator from a kernel already laid out on the full grid
    /// (center at index `(0, 0)`).
    pub fn new(kernel: Tensor) -> Result<Self> {
        let (h, w, c) = kernel.spatial();
        if c != 1 {
            return Err(Error::InvalidShape {
                shape: kernel.shape().to_vec(),
                reason: "circulant kernels are single-channel".into(),
            });
        }
        let fft = Fft2::new(h, w);
        let spectrum = Arc::new(fft.forward_real(kernel.data()));
        let d = kernel.data();
        let identity = d[0] == 1.0 && d[1..].iter().all(|&v| v == 0.0);
        Ok(CirculantOperator {
            kernel,
            spectrum,
            fft,
            identity,
        })
    }

    /// Embeds a small `kh x kw` kernel into an `h x w` periodic grid with its
    /// center (`kh / 2`, `kw / 2`) mapped to `(0, 0)`.
    pub fn from_kernel(small: &Tensor, h: usize, w: usize) -> Result<Self> {
        let (kh, kw, c) = small.spatial();
        if c != 1 || kh > h || kw > w {
            return Err(Error::InvalidShape {
                shape: small.shape().to_vec(),
                reason: format!("kernel does not fit a {h}x{w} grid"),
            });
        }
        let mut data = vec![0.0; h * w];
        let (ch, cw) = (kh / 2, kw / 2);
        for i in 0..kh {
            for j in 0..kw {
                let r = (i + h - ch) % h;
                let s = (j + w - cw) % w;
                data[r * w + s] += small.data()[i * kw + j];
            }
        }
        CirculantOperator::new(Tensor::from_parts(grid_shape(h, w), data))
    }

    pub fn identity(h: usize, w: usize) -> Self {
        let mut data = vec![0.0; h * w];
        data[0] = 1.0;
        CirculantOperator::new(Tensor::from_parts(grid_shape(h, w), data))
            .expect("identity kernel is valid")
    }

    pub fn zero(h: usize, w: usize) -> Self {
        CirculantOperator::new(Tensor::zeros(&grid_shape(h, w))).expect("zero kernel is valid")
    }

    /// Builds an operator directly from a real, Hermitian-symmetric spectrum.
    pub(crate) fn from_real_spectrum(h: usize, w: usize, spectrum: Vec<f64>) -> Result<Self> {
        let fft = Fft2::new(h, w);
        let mut buf: Vec<Complex64> = spectrum.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.inverse(&mut buf);
        let kernel = Tensor::new(grid_shape(h, w), buf.iter().map(|c| c.re).collect())?;
        CirculantOperator::new(kernel)
    }

    pub fn kernel(&self) -> &Tensor {
        &self.kernel
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn grid(&self) -> (usize, usize) {
        self.fft.dims()
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    fn check_operand(&self, x: &Tensor) -> Result<()> {
        let (h, w, _) = x.spatial();
        if (h, w) != self.grid() {
            return Err(Error::ShapeMismatch {
                expected: self.kernel.shape().to_vec(),
                found: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// `A x`: circular convolution with the kernel.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        self.check_operand(x)?;
        if self.identity {
            return Ok(x.clone());
        }
        Ok(self.fft.filter(x, |i| self.spectrum[i]))
    }

    /// `Aᵀ x`, using the conjugate spectrum.
    pub fn adjoint(&self, x: &Tensor) -> Result<Tensor> {
        self.check_operand(x)?;
        if self.identity {
            return Ok(x.clone());
        }
        Ok(self.fft.filter(x, |i| self.spectrum[i].conj()))
    }

    /// `AᵀA x`
    pub fn normal(&self, x: &Tensor) -> Result<Tensor> {
        self.check_operand(x)?;
        if self.identity {
            return Ok(x.clone());
        }
        Ok(self
            .fft
            .filter(x, |i| Complex64::new(self.spectrum[i].norm_sqr(), 0.0)))
    }

    /// Solves `(a I + AᵀA) u = r` spectrally.
    pub fn solve_shifted(&self, a: f64, r: &Tensor) -> Result<Tensor> {
        if !(a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "shift must be positive, got {a}"
            )));
        }
        self.check_operand(r)?;
        Ok(self
            .fft
            .filter(r, |i| Complex64::new(1.0 / (a + self.spectrum[i].norm_sqr()), 0.0)))
    }

    /// `λ_max(AᵀA) = max |Â|²`
    pub fn max_normal_eigenvalue(&self) -> f64 {
        self.spectrum.iter().fold(0.0, |m, c| m.max(c.norm_sqr()))
    }

    /// `λ_min(AᵀA) = min |Â|²`
    pub fn min_normal_eigenvalue(&self) -> f64 {
        self.spectrum
            .iter()
            .fold(f64::INFINITY, |m, c| m.min(c.norm_sqr()))
    }
}

fn grid_shape(h: usize, w: usize) -> Vec<usize> {
    if h == 1 {
        vec![w]
    } else {
        vec![h, w]
    }
}

/// Applies the circulant operator: `IDFT(Â ⊙ DFT(x))`.
pub fn circ_apply(op: &CirculantOperator, x: &Tensor) -> Result<Tensor> {
    op.apply(x)
}

/// Solves `(a I + AᵀA) u = r`.
pub fn circ_solve(a: f64, op: &CirculantOperator, r: &Tensor) -> Result<Tensor> {
    op.solve_shifted(a, r)
}

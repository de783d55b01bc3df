//! Parametric blur kernels and a plain-text kernel loader.
//!
//! Kernels are small `kh x kw` tensors (odd sizes, normalized to unit sum)
//! meant for [`CirculantOperator::from_kernel`](crate::tensor::CirculantOperator::from_kernel).
//!
//! Text format: one kernel row per line, entries separated by whitespace;
//! blank lines and lines starting with `#` are skipped. Loaded kernels are
//! used as written, without renormalization.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn shaped(kh: usize, kw: usize, data: Vec<f64>) -> Result<Tensor> {
    if kh == 1 {
        Tensor::new(vec![kw], data)
    } else {
        Tensor::new(vec![kh, kw], data)
    }
}

fn normalized(kh: usize, kw: usize, mut data: Vec<f64>) -> Result<Tensor> {
    let s: f64 = data.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidParameter("kernel has no mass".into()));
    }
    data.iter_mut().for_each(|v| *v /= s);
    shaped(kh, kw, data)
}

// Largest odd size ≤ min(want, dim).
fn fit(want: usize, dim: usize) -> usize {
    let n = want.min(dim).max(1);
    if n % 2 == 0 {
        n - 1
    } else {
        n
    }
}

/// Normalized Gaussian of standard deviation `width` pixels, truncated at
/// three standard deviations and to the largest odd size fitting `h x w`.
pub fn gaussian(width: f64, h: usize, w: usize) -> Result<Tensor> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameter(format!("gaussian width must be positive, got {width}")));
    }
    let r = (3.0 * width).ceil() as usize;
    let (kh, kw) = (fit(2 * r + 1, h), fit(2 * r + 1, w));
    let (ch, cw) = ((kh / 2) as f64, (kw / 2) as f64);
    let mut data = Vec::with_capacity(kh * kw);
    for i in 0..kh {
        for j in 0..kw {
            let (di, dj) = (i as f64 - ch, j as f64 - cw);
            data.push((-(di * di + dj * dj) / (2.0 * width * width)).exp());
        }
    }
    normalized(kh, kw, data)
}

/// `size x size` box average.
pub fn uniform(size: usize) -> Result<Tensor> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::InvalidParameter(format!("uniform kernel size must be odd, got {size}")));
    }
    normalized(size, size, vec![1.0; size * size])
}

/// Line of `length` pixels at `angle_deg` degrees (counter-clockwise from the
/// horizontal), rasterized by 16x supersampling along the segment.
pub fn motion(length: f64, angle_deg: f64) -> Result<Tensor> {
    if !(length >= 1.0) || !length.is_finite() || !angle_deg.is_finite() {
        return Err(Error::InvalidParameter(format!("motion length must be at least 1, got {length}")));
    }
    let r = ((length - 1.0) / 2.0).ceil() as usize;
    let n = 2 * r + 1;
    let (s, c) = angle_deg.to_radians().sin_cos();
    let mut data = vec![0.0; n * n];
    let samples = (16.0 * length).ceil() as usize;
    for t in 0..=samples {
        let d = (t as f64 / samples as f64 - 0.5) * (length - 1.0);
        let i = (r as f64 - d * s).round() as usize;
        let j = (r as f64 + d * c).round() as usize;
        data[i * n + j] += 1.0;
    }
    normalized(n, n, data)
}

pub fn parse_kernel(text: &str) -> Result<Tensor> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("kernel line {}: {e}", no + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "kernel line {}: {} entries, expected {}",
                    no + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("kernel file has no rows".into()));
    }
    let (kh, kw) = (rows.len(), rows[0].len());
    shaped(kh, kw, rows.concat())
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kernel(&text)
}

//! A small convolutional potential loadable from a binary weights file.
//!
//! `g(x) = Σ_c a_c Σ_pixels log cosh((k_c ∗ x) + b_c)` with periodic, center-anchored
//! convolutions. Its gradient is `Σ_c a_c K_cᵀ tanh(K_c x + b_c)` and its Hessian
//! norm is at most `Σ_c |a_c| ‖k_c‖₁²`, which must be below 1.
//!
//! File layout, all little-endian:
//!
//! | bytes            | content                                    |
//! |------------------|--------------------------------------------|
//! | 4                | magic `GSD1`                               |
//! | 4 × u32          | number of filters `n`, `kh`, `kw`          |
//! | per filter       | `a: f64`, `b: f64`, then `kh·kw` f64 taps row-major |

use std::path::Path;

use crate::error::{Error, Result};
use crate::priors::denoiser::Potential;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"GSD1";

#[derive(Clone, Debug, PartialEq)]
pub struct ConvFilter {
    pub a: f64,
    pub b: f64,
    pub taps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvPotential {
    kh: usize,
    kw: usize,
    filters: Vec<ConvFilter>,
    lip: f64,
}

fn log_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl ConvPotential {
    pub fn new(kh: usize, kw: usize, filters: Vec<ConvFilter>) -> Result<Self> {
        if kh == 0 || kw == 0 {
            return Err(Error::Format("filter size must be positive".into()));
        }
        for f in &filters {
            if f.taps.len() != kh * kw {
                return Err(Error::Format(format!("filter has {} taps, expected {}", f.taps.len(), kh * kw)));
            }
            if !f.a.is_finite() || !f.b.is_finite() || f.taps.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format("non-finite filter weight".into()));
            }
        }
        let lip = filters
            .iter()
            .map(|f| {
                let l1: f64 = f.taps.iter().map(|v| v.abs()).sum();
                f.a.abs() * l1 * l1
            })
            .sum();
        Ok(ConvPotential { kh, kw, filters, lip })
    }

    pub fn filters(&self) -> &[ConvFilter] {
        &self.filters
    }

    /// `(k ∗ x)[i, j] = Σ k[p, q] x[i − p + kh/2, j − q + kw/2]`, periodic.
    fn conv(&self, taps: &[f64], x: &[f64], h: usize, w: usize, adjoint: bool) -> Vec<f64> {
        let (ch, cw) = ((self.kh / 2) as isize, (self.kw / 2) as isize);
        let (hi, wi) = (h as isize, w as isize);
        let mut out = vec![0.0; h * w];
        for i in 0..hi {
            for j in 0..wi {
                let mut acc = 0.0;
                for p in 0..self.kh as isize {
                    for q in 0..self.kw as isize {
                        let (di, dj) = if adjoint { (p - ch, q - cw) } else { (ch - p, cw - q) };
                        let r = (i + di).rem_euclid(hi) as usize;
                        let s = (j + dj).rem_euclid(wi) as usize;
                        acc += taps[(p as usize) * self.kw + q as usize] * x[r * w + s];
                    }
                }
                out[(i * wi + j) as usize] = acc;
            }
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::Format("weights file: bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (n, kh, kw) = (u32_at(4), u32_at(8), u32_at(12));
        let per = kh.checked_mul(kw).and_then(|t| t.checked_add(2)).ok_or_else(|| Error::Format("weights file: size overflow".into()))?;
        let expected = n.checked_mul(per).and_then(|t| t.checked_mul(8)).and_then(|t| t.checked_add(16));
        if expected != Some(bytes.len()) {
            return Err(Error::Format(format!(
                "weights file: expected {} bytes, found {}",
                expected.map_or("too many".to_string(), |e| e.to_string()),
                bytes.len()
            )));
        }
        let vals: Vec<f64> = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let filters = vals
            .chunks_exact(per)
            .map(|c| ConvFilter { a: c[0], b: c[1], taps: c[2..].to_vec() })
            .collect();
        ConvPotential::new(kh, kw, filters)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        for v in [self.filters.len(), self.kh, self.kw] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for f in &self.filters {
            out.extend_from_slice(&f.a.to_le_bytes());
            out.extend_from_slice(&f.b.to_le_bytes());
            for t in &f.taps {
                out.extend_from_slice(&t.to_le_bytes());
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

impl Potential for ConvPotential {
    fn value(&self, x: &Tensor) -> f64 {
        let (h, w, c) = x.spatial();
        let mut total = 0.0;
        for ch in 0..c {
            let plane = x.channel(ch);
            for f in &self.filters {
                let r = self.conv(&f.taps, &plane, h, w, false);
                total += f.a * r.iter().map(|v| log_cosh(v + f.b)).sum::<f64>();
            }
        }
        total
    }

    fn gradient(&self, x: &Tensor) -> Tensor {
        let (h, w, _) = x.spatial();
        x.map_channels(|plane| {
            let mut g = vec![0.0; h * w];
            for f in &self.filters {
                let r: Vec<f64> = self.conv(&f.taps, plane, h, w, false).iter().map(|v| f.a * (v + f.b).tanh()).collect();
                for (acc, v) in g.iter_mut().zip(self.conv(&f.taps, &r, h, w, true)) {
                    *acc += v;
                }
            }
            g
        })
    }

    fn lipschitz(&self) -> f64 {
        self.lip
    }
}

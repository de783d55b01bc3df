use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Upper bound reported when the images (almost) coincide.
pub const PSNR_CAP: f64 = 100.0;

pub fn mse(x: &Tensor, reference: &Tensor) -> Result<f64> {
    x.check_same_shape(reference)?;
    Ok(x.distance(reference).powi(2) / x.len() as f64)
}

/// `10 log₁₀(peak² / MSE)`, capped at [`PSNR_CAP`] once `MSE < peak²·1e-10`.
pub fn psnr(x: &Tensor, reference: &Tensor, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let m = mse(x, reference)?;
    if m < peak * peak * 1e-10 {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

const WIN: usize = 11;
const WIN_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn window() -> [f64; WIN * WIN] {
    let mut w = [0.0; WIN * WIN];
    let c = (WIN / 2) as f64;
    for i in 0..WIN {
        for j in 0..WIN {
            let (a, b) = (i as f64 - c, j as f64 - c);
            w[i * WIN + j] = (-(a * a + b * b) / (2.0 * WIN_SIGMA * WIN_SIGMA)).exp();
        }
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Mean structural similarity over every position where the 11x11 Gaussian
/// window (σ = 1.5) fits entirely inside the image, averaged over channels.
/// Intensities are taken on a dynamic range of 1.
pub fn ssim(x: &Tensor, reference: &Tensor) -> Result<f64> {
    x.check_same_shape(reference)?;
    let (h, w, nc) = x.spatial();
    if h < WIN || w < WIN {
        return Err(Error::InvalidShape {
            shape: x.shape().to_vec(),
            reason: format!("image smaller than the {WIN}x{WIN} window"),
        });
    }
    let win = window();
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..nc {
        let (a, b) = (x.channel(c), reference.channel(c));
        for i in 0..=h - WIN {
            for j in 0..=w - WIN {
                let at = |p: usize, q: usize| (i + p) * w + j + q;
                let (mut ma, mut mb) = (0.0, 0.0);
                for p in 0..WIN {
                    for q in 0..WIN {
                        let g = win[p * WIN + q];
                        ma += g * a[at(p, q)];
                        mb += g * b[at(p, q)];
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for p in 0..WIN {
                    for q in 0..WIN {
                        let g = win[p * WIN + q];
                        let (da, db) = (a[at(p, q)] - ma, b[at(p, q)] - mb);
                        va += g * da * da;
                        vb += g * db * db;
                        cov += g * da * db;
                    }
                }
                total += (2.0 * ma * mb + C1) * (2.0 * cov + C2) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

//! Deterministic test images in `[0, 1]`.

use crate::tensor::Tensor;

/// Piecewise-smooth scene: a vertical ramp background, a bright rectangle,
/// a mid-gray disk and a thin dark bar. Scales with the grid.
pub fn phantom(h: usize, w: usize) -> Tensor {
    let mut data = Vec::with_capacity(h * w);
    let (hf, wf) = (h as f64, w as f64);
    for i in 0..h {
        for j in 0..w {
            let (y, x) = ((i as f64 + 0.5) / hf, (j as f64 + 0.5) / wf);
            let mut v = 0.15 + 0.25 * y;
            if (0.15..0.45).contains(&y) && (0.1..0.55).contains(&x) {
                v = 0.85;
            }
            if (x - 0.68).powi(2) + (y - 0.65).powi(2) < 0.22 * 0.22 {
                v = 0.55;
            }
            if (0.78..0.86).contains(&y) && (0.08..0.5).contains(&x) {
                v = 0.05;
            }
            data.push(v);
        }
    }
    Tensor::from_parts(if h == 1 { vec![w] } else { vec![h, w] }, data)
}

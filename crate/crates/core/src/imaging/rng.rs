//! SplitMix64, the noise generator behind every seeded degradation.
//!
//! Chosen because it is tiny and trivially portable: the same seed yields the
//! same stream in any language with wrapping 64-bit arithmetic.
//!
//! * `next_u64`: `s += 0x9E3779B97F4A7C15`, then the usual xor-shift-multiply finalizer.
//! * `next_f64`: `((next_u64 >> 11) + 0.5) · 2⁻⁵³`, strictly inside `(0, 1)`.
//! * `gaussian`: Box–Muller from two fresh uniforms `u₁, u₂`, returning
//!   `√(−2 ln u₁) · cos(2π u₂)`. The sine half is discarded so that every draw
//!   consumes exactly two words.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

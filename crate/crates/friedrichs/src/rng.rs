//! Seeded deterministic random vectors for the verification suite.
//!
//! A tiny SplitMix64 generator is enough here: the only consumers are
//! reproducible test vectors (random unit states, sample points), and the
//! seed is recorded in run metadata so outputs are byte-stable.

use crate::{C64, CVec};

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn standard_normal(&mut self) -> f64 {
        let u = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let v = self.next_f64();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    pub fn complex_normal(&mut self) -> C64 {
        C64::new(self.standard_normal(), self.standard_normal())
    }

    /// Complex Gaussian vector normalized to unit 2-norm.
    pub fn unit_vector(&mut self, n: usize) -> CVec {
        loop {
            let v = CVec::from_fn(n, |_, _| self.complex_normal());
            let norm = v.norm();
            if norm > 1e-8 {
                return v / C64::new(norm, 0.0);
            }
        }
    }
}

//! Counter-based Gaussian noise keyed by `(seed, step, pair)`.
//!
//! Every deviate is a pure function of its key, so the order in which pairs
//! are visited cannot change the noise a pair receives. The bit source is
//! Philox4x32-10 (Salmon et al., SC'11); the Gaussian transform is the cosine
//! branch of Box–Muller applied to two 53-bit uniforms from one Philox block.
//! Changing either choice changes every trajectory.

use crate::error::{DpdError, Result};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Uniform in the open interval (0, 1) from the top 53 bits of `bits`.
#[inline(always)]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    master_seed: u64,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Standard normal deviate for pair `(i, j)` at `step`; symmetric in `i`, `j`.
    pub fn pair_gaussian(&self, step: u64, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Err(DpdError::InvalidPair(i));
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        Ok(self.ordered_pair_gaussian(step, lo, hi))
    }

    /// Fast path for callers that already hold `i < j`.
    #[inline]
    pub fn ordered_pair_gaussian(&self, step: u64, i: usize, j: usize) -> f64 {
        debug_assert!(i < j);
        let counter = [step as u32, (step >> 32) as u32, i as u32, j as u32];
        let key = [self.master_seed as u32, (self.master_seed >> 32) as u32];
        let x = philox4x32_10(counter, key);
        let u1 = open_unit((u64::from(x[0]) << 32) | u64::from(x[1]));
        let u2 = open_unit((u64::from(x[2]) << 32) | u64::from(x[3]));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

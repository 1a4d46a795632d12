//! Counter-based random streams for the scene simulator.
//!
//! Every random draw is a pure function of `(seed, purpose, index)`, so a
//! sample's noise does not depend on generation order. The block cipher is
//! Philox4x32-10 (Salmon et al., Random123) with its standard constants:
//!
//! - multipliers `0xD2511F53`, `0xCD9E8D57`
//! - Weyl key increments `0x9E3779B9`, `0xBB67AE85`
//!
//! The 128-bit counter is `[index_lo, index_hi, purpose, 0]` and the 64-bit
//! key is the seed split into two words.

use std::f64::consts::TAU;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;
const PHILOX_ROUNDS: usize = 10;

/// Purpose identifiers keying independent substreams.
pub mod purpose {
    pub const NOISE: u32 = 1;
    pub const PHASE: u32 = 2;
    pub const EM_RESTART: u32 = 3;
    pub const SCHEDULE: u32 = 4;
}

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32-10 block.
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..PHILOX_ROUNDS {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// A keyed substream: random values addressed by index.
#[derive(Debug, Clone, Copy)]
pub struct Stream {
    key: [u32; 2],
    purpose: u32,
}

impl Stream {
    pub fn new(seed: u64, purpose: u32) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            purpose,
        }
    }

    pub fn block(&self, index: u64) -> [u32; 4] {
        philox4x32([index as u32, (index >> 32) as u32, self.purpose, 0], self.key)
    }

    /// Two uniforms in the open interval (0, 1), 52-bit resolution.
    pub fn uniform_pair(&self, index: u64) -> (f64, f64) {
        let b = self.block(index);
        (to_open_unit(b[0], b[1]), to_open_unit(b[2], b[3]))
    }

    /// Two independent standard normals (Box-Muller).
    pub fn normal_pair(&self, index: u64) -> (f64, f64) {
        let (u1, u2) = self.uniform_pair(index);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

#[inline]
fn to_open_unit(hi: u32, lo: u32) -> f64 {
    let bits = ((u64::from(hi) << 20) ^ u64::from(lo >> 12)) & ((1 << 52) - 1);
    (bits as f64 + 0.5) / (1u64 << 52) as f64
}
